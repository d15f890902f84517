#pragma once

#include <fstream>
#include <set>

#include "json.hpp"

#include "uavsense/presets.hpp"

namespace uavsense::harness {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

// Strict object reader: every key must be consumed, errors carry the JSON path.
class ObjReader {
 public:
  ObjReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw FormatError(path_ + ": expected an object");
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  std::string at(const std::string& k) const { return path_ + "." + k; }

  template <class T>
  void opt(const std::string& k, T& out) {
    if (!has(k)) return;
    seen_.insert(k);
    out = convert<T>(j_.at(k), at(k));
  }
  template <class T>
  void opt(const std::string& k, std::optional<T>& out) {
    if (!has(k) || j_.at(k).is_null()) {
      if (has(k)) seen_.insert(k);
      return;
    }
    seen_.insert(k);
    out = convert<T>(j_.at(k), at(k));
  }
  template <class T>
  T need(const std::string& k) {
    if (!has(k)) throw FormatError(at(k) + ": missing");
    seen_.insert(k);
    return convert<T>(j_.at(k), at(k));
  }
  const json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw FormatError(at(it.key()) + ": unknown key");
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, Vec2>) {
        auto a = v.get<std::vector<double>>();
        if (a.size() != 2) throw FormatError(where + ": expected [x, y]");
        return {a[0], a[1]};
      } else if constexpr (std::is_same_v<T, Vec3>) {
        auto a = v.get<std::vector<double>>();
        if (a.size() != 3) throw FormatError(where + ": expected [x, y, z]");
        return {a[0], a[1], a[2]};
      } else if constexpr (std::is_same_v<T, std::vector<Vec2>>) {
        if (!v.is_array()) throw FormatError(where + ": expected an array");
        std::vector<Vec2> out;
        for (std::size_t i = 0; i < v.size(); ++i)
          out.push_back(convert<Vec2>(v[i], where + "[" + std::to_string(i) + "]"));
        return out;
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw FormatError(where + ": expected a number");
        return v.get<double>();
      } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer()) throw FormatError(where + ": expected an integer");
        return v.get<T>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw FormatError(where + ": expected true/false");
        return v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw FormatError(where + ": expected a string");
        return v.get<std::string>();
      } else {
        return v.get<T>();
      }
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json vec(Vec2 v) { return json::array({v.x, v.y}); }
inline json vec(Vec3 v) { return json::array({v.x, v.y, v.z}); }

// ---- SRS --------------------------------------------------------------------

inline json to_json(const waveform::SrsConfig& c) {
  return {{"numerology_mu", c.numerology_mu}, {"n_fft", c.n_fft},       {"comb_ktc", c.comb_ktc},
          {"m_srs_rb", c.m_srs_rb},           {"k0", c.k0},             {"seq_id_q", c.seq_id_q},
          {"period_slots", c.period_slots},   {"cp_len", c.cp_len},     {"zc_for_short", c.zc_for_short}};
}

inline waveform::SrsConfig srs_from_json(const json& j, const std::string& path = "srs") {
  waveform::SrsConfig c;
  ObjReader r(j, path);
  r.opt("numerology_mu", c.numerology_mu);
  r.opt("n_fft", c.n_fft);
  r.opt("comb_ktc", c.comb_ktc);
  r.opt("m_srs_rb", c.m_srs_rb);
  r.opt("k0", c.k0);
  r.opt("seq_id_q", c.seq_id_q);
  r.opt("shift_index_w", c.shift_index_w);
  r.opt("period_slots", c.period_slots);
  r.opt("cp_len", c.cp_len);
  r.opt("zc_for_short", c.zc_for_short);
  r.finish();
  c.validate();
  return c;
}

// ---- channel ----------------------------------------------------------------

inline json to_json(const channel::PropagationModel& m) {
  return {{"pl_exponent", m.pl_exponent},
          {"blockage_db", m.blockage_db},
          {"n_refl", m.n_refl},
          {"refl_rel_db", m.refl_rel_db},
          {"max_excess_delay_s", m.max_excess_delay_s},
          {"delay_decay_s", m.delay_decay_s},
          {"reflections", m.reflections}};
}

inline channel::PropagationModel model_from_json(const json& j, channel::PropagationModel m,
                                                 const std::string& path) {
  ObjReader r(j, path);
  r.opt("pl_exponent", m.pl_exponent);
  r.opt("blockage_db", m.blockage_db);
  r.opt("n_refl", m.n_refl);
  r.opt("refl_rel_db", m.refl_rel_db);
  r.opt("max_excess_delay_s", m.max_excess_delay_s);
  r.opt("delay_decay_s", m.delay_decay_s);
  r.opt("reflections", m.reflections);
  r.finish();
  if (m.n_refl < 0 || m.max_excess_delay_s < 0 || !(m.delay_decay_s > 0))
    throw ConfigError(path + ": invalid tap parameters");
  return m;
}

inline json to_json(const channel::Antenna& a) {
  json p;
  if (a.pattern.kind == channel::AntennaPattern::Kind::dipole)
    p = {{"kind", "dipole"}, {"axis", vec(a.pattern.axis)}};
  else
    p = {{"kind", "tabulated"},
         {"az_deg", a.pattern.table.az_deg},
         {"el_deg", a.pattern.table.el_deg},
         {"gain_db", a.pattern.table.gain_db}};
  p["floor_db"] = a.pattern.floor_db;
  return {{"offset", vec(a.offset)}, {"pattern", p}};
}

inline channel::Antenna antenna_from_json(const json& j, const std::string& path) {
  channel::Antenna a;
  ObjReader r(j, path);
  r.opt("offset", a.offset);
  if (r.has("pattern")) {
    ObjReader p(r.raw("pattern"), path + ".pattern");
    std::string kind = "dipole";
    p.opt("kind", kind);
    p.opt("floor_db", a.pattern.floor_db);
    if (kind == "dipole") {
      p.opt("axis", a.pattern.axis);
      if (a.pattern.axis.norm() == 0) throw ConfigError(path + ".pattern.axis: zero vector");
    } else if (kind == "tabulated") {
      a.pattern.kind = channel::AntennaPattern::Kind::tabulated;
      a.pattern.table.az_deg = p.need<rvec>("az_deg");
      a.pattern.table.el_deg = p.need<rvec>("el_deg");
      a.pattern.table.gain_db = p.need<std::vector<rvec>>("gain_db");
      const auto& t = a.pattern.table;
      if (t.az_deg.empty() || t.el_deg.empty() || t.gain_db.size() != t.el_deg.size())
        throw ConfigError(path + ".pattern: table shape mismatch");
      for (auto& row : t.gain_db)
        if (row.size() != t.az_deg.size()) throw ConfigError(path + ".pattern: table shape mismatch");
    } else {
      throw FormatError(path + ".pattern.kind: expected dipole or tabulated");
    }
    p.finish();
  }
  r.finish();
  return a;
}

// ---- scenario file ----------------------------------------------------------

struct ScenarioFile {
  mission::Scenario scenario;
  mission::MissionPlan plan;
  mission::Processing processing;
  std::uint64_t seed = 1;
};

inline json to_json(const mission::Processing& p) {
  return {{"m_th", p.m_th},
          {"gamma_th", p.gamma_th},
          {"beta", p.beta},
          {"delta", p.delta},
          {"oversample", p.mp.oversample},
          {"bic_penalty", p.mp.bic_penalty},
          {"cycles", p.mp.cycles},
          {"max_components", p.mp.max_components},
          {"max_misses", p.max_misses},
          {"reacquire_s", p.reacquire_s}};
}

inline mission::Processing processing_from_json(const json& j, const std::string& path = "processing") {
  mission::Processing p;
  ObjReader r(j, path);
  r.opt("m_th", p.m_th);
  r.opt("gamma_th", p.gamma_th);
  r.opt("beta", p.beta);
  r.opt("delta", p.delta);
  r.opt("oversample", p.mp.oversample);
  r.opt("bic_penalty", p.mp.bic_penalty);
  r.opt("cycles", p.mp.cycles);
  r.opt("max_components", p.mp.max_components);
  r.opt("max_misses", p.max_misses);
  r.opt("reacquire_s", p.reacquire_s);
  r.finish();
  if (!(p.m_th > 0 && p.m_th < 1)) throw ConfigError(path + ".m_th must be in (0,1)");
  if (!(p.gamma_th >= 0 && p.gamma_th <= 1)) throw ConfigError(path + ".gamma_th must be in [0,1]");
  if (p.beta < 0 || p.beta > 1) throw ConfigError(path + ".beta must be in [0,1]");
  if (p.mp.oversample < 1 || p.mp.max_components < 1 || p.mp.cycles < 0 || p.max_misses < 1)
    throw ConfigError(path + ": invalid pursuit settings");
  return p;
}

inline const char* to_string(channel::ChannelMode m) {
  return m == channel::ChannelMode::rural ? "rural" : "urban";
}

inline json to_json(const ScenarioFile& f) {
  const auto& s = f.scenario;
  const auto& p = f.plan;
  json area = json::array();
  for (auto& v : s.area) area.push_back(vec(v));
  json ants = json::array();
  for (auto& a : s.antennas) ants.push_back(to_json(a));
  json ues = json::array();
  for (auto& u : s.ues) {
    const auto& q = u.profile;
    json x = {{"id", q.ue_id},
              {"position", vec(q.position)},
              {"band", q.band_id},
              {"shift", q.shift_index_w},
              {"tx_power_dbm", q.tx_power_dbm},
              {"clock_drift_ppm", q.clock_drift_ppm},
              {"mode", to_string(q.mode)},
              {"los", q.los}};
    if (u.cfo_hz) x["cfo_hz"] = *u.cfo_hz;
    if (u.timing_advance_s) x["timing_advance_s"] = *u.timing_advance_s;
    if (u.antenna_gain_db) x["antenna_gain_db"] = *u.antenna_gain_db;
    ues.push_back(x);
  }
  return {{"schema_version", schema_version},
          {"name", s.name},
          {"seed", f.seed},
          {"area", area},
          {"home", vec(s.home)},
          {"gnb", vec(s.gnb)},
          {"fc_hz", s.fc_hz},
          {"noise_figure_db", s.noise_figure_db},
          {"srs", to_json(s.srs)},
          {"channel", {{"rural", to_json(s.rural)}, {"urban", to_json(s.urban)}}},
          {"uav", {{"altitude_m", p.altitude_m}, {"speed_mps", p.speed_mps}, {"antennas", ants}}},
          {"plan",
           {{"center", vec(p.center)},
            {"perimeter_margin_m", p.perimeter_margin_m},
            {"hex_radius_m", p.hex_radius_m},
            {"min_sample_spacing_m", p.min_sample_spacing_m},
            {"waypoint_spacing_m", p.waypoint_spacing_m},
            {"dt_s", p.dt_s},
            {"max_time_s", p.max_time_s}}},
          {"processing", to_json(f.processing)},
          {"ues", ues}};
}

inline ScenarioFile scenario_from_json(const json& j) {
  ScenarioFile f;
  auto& s = f.scenario;
  ObjReader r(j, "$");
  int ver = schema_version;
  r.opt("schema_version", ver);
  if (ver != schema_version) throw FormatError("$.schema_version: unsupported " + std::to_string(ver));
  r.opt("name", s.name);
  r.opt("seed", f.seed);
  s.area = r.need<std::vector<Vec2>>("area");
  mission::validate_area(s.area);
  s.home = mission::centroid(s.area);
  r.opt("home", s.home);
  r.opt("gnb", s.gnb);
  r.opt("fc_hz", s.fc_hz);
  r.opt("noise_figure_db", s.noise_figure_db);
  if (!(s.fc_hz > 0)) throw ConfigError("$.fc_hz must be positive");
  if (r.has("srs")) s.srs = srs_from_json(r.raw("srs"), "$.srs");
  if (r.has("channel")) {
    ObjReader c(r.raw("channel"), "$.channel");
    if (c.has("rural")) s.rural = model_from_json(c.raw("rural"), s.rural, "$.channel.rural");
    if (c.has("urban")) s.urban = model_from_json(c.raw("urban"), s.urban, "$.channel.urban");
    c.finish();
  }
  f.plan = mission::MissionPlan::for_scenario(s);
  if (r.has("uav")) {
    ObjReader u(r.raw("uav"), "$.uav");
    u.opt("altitude_m", f.plan.altitude_m);
    u.opt("speed_mps", f.plan.speed_mps);
    if (u.has("antennas")) {
      const json& a = u.raw("antennas");
      if (!a.is_array() || a.empty()) throw FormatError("$.uav.antennas: expected a non-empty array");
      s.antennas.clear();
      for (std::size_t i = 0; i < a.size(); ++i)
        s.antennas.push_back(antenna_from_json(a[i], "$.uav.antennas[" + std::to_string(i) + "]"));
    }
    u.finish();
  }
  if (r.has("plan")) {
    ObjReader p(r.raw("plan"), "$.plan");
    p.opt("center", f.plan.center);
    p.opt("perimeter_margin_m", f.plan.perimeter_margin_m);
    p.opt("hex_radius_m", f.plan.hex_radius_m);
    p.opt("min_sample_spacing_m", f.plan.min_sample_spacing_m);
    p.opt("waypoint_spacing_m", f.plan.waypoint_spacing_m);
    p.opt("dt_s", f.plan.dt_s);
    p.opt("max_time_s", f.plan.max_time_s);
    p.finish();
  }
  f.plan.home = s.home;
  if (r.has("processing")) f.processing = processing_from_json(r.raw("processing"), "$.processing");
  if (r.has("ues")) {
    const json& a = r.raw("ues");
    if (!a.is_array()) throw FormatError("$.ues: expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string path = "$.ues[" + std::to_string(i) + "]";
      ObjReader u(a[i], path);
      mission::ScenarioUe x;
      auto& q = x.profile;
      q.ue_id = u.need<int>("id");
      q.position = u.need<Vec3>("position");
      u.opt("band", q.band_id);
      u.opt("shift", q.shift_index_w);
      u.opt("tx_power_dbm", q.tx_power_dbm);
      u.opt("clock_drift_ppm", q.clock_drift_ppm);
      std::string mode = "rural";
      u.opt("mode", mode);
      if (mode == "rural")
        q.mode = channel::ChannelMode::rural;
      else if (mode == "urban")
        q.mode = channel::ChannelMode::urban;
      else
        throw FormatError(path + ".mode: expected rural or urban");
      u.opt("los", q.los);
      u.opt("cfo_hz", x.cfo_hz);
      u.opt("timing_advance_s", x.timing_advance_s);
      u.opt("antenna_gain_db", x.antenna_gain_db);
      u.finish();
      s.ues.push_back(x);
    }
  }
  r.finish();
  f.plan.validate();
  mission::resolve_ues(s, f.seed);  // label and CFO checks
  return f;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline ScenarioFile load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

inline ScenarioFile preset_file(const mission::Scenario& s) {
  ScenarioFile f;
  f.scenario = s;
  f.plan = presets::plan_for(s);
  return f;
}

inline const char* scenario_schema_help() {
  return R"(scenario file (JSON):
  schema_version 1, name, seed, area [[x,y],...] (convex), home [x,y], gnb [x,y,z],
  fc_hz, noise_figure_db, srs {numerology_mu, n_fft, comb_ktc, m_srs_rb, k0, seq_id_q,
  period_slots, cp_len}, channel {rural|urban: {pl_exponent, blockage_db, n_refl,
  refl_rel_db, max_excess_delay_s, delay_decay_s, reflections}},
  uav {altitude_m, speed_mps, antennas [{offset [x,y,z], pattern {kind dipole, axis} |
  {kind tabulated, az_deg, el_deg, gain_db}}]}, plan {center, perimeter_margin_m,
  hex_radius_m, min_sample_spacing_m, waypoint_spacing_m, dt_s, max_time_s},
  processing {m_th, gamma_th, beta, delta, oversample, bic_penalty, cycles,
  max_components, max_misses, reacquire_s},
  ues [{id, position [x,y,z], band, shift, tx_power_dbm, clock_drift_ppm,
  mode rural|urban, los, cfo_hz?, timing_advance_s?, antenna_gain_db?}]
)";
}

}  // namespace uavsense::harness
