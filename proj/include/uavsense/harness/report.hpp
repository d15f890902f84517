#pragma once

#include <cstdio>
#include <ostream>

#include "uavsense/harness/sweep.hpp"

// CSV and JSON writers. Numbers are printed with %.10g so output is stable
// across runs; missing values are empty CSV fields or JSON null.
namespace uavsense::harness {

inline std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
inline std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline json jnum(const std::optional<double>& v) { return v ? jnum(*v) : json(nullptr); }

// ---- detection log ----------------------------------------------------------

inline constexpr const char* detection_header = "time_s,band,antenna,iteration,f_hat,gamma_db,shift_hat,verdict";

inline void write_detections_csv(std::ostream& os, const std::vector<mission::DetectionRow>& rows) {
  os << detection_header << "\n";
  for (const auto& r : rows)
    os << num(r.t) << "," << r.band << "," << r.antenna << "," << r.iteration << "," << num(r.f_hat) << ","
       << num(r.gamma_db) << "," << (r.shift_hat >= 0 ? std::to_string(r.shift_hat) : "") << "," << r.verdict
       << "\n";
}

inline json detections_json(const std::vector<mission::DetectionRow>& rows) {
  json a = json::array();
  for (const auto& r : rows)
    a.push_back({{"time_s", jnum(r.t)},
                 {"band", r.band},
                 {"antenna", r.antenna},
                 {"iteration", r.iteration},
                 {"f_hat", jnum(r.f_hat)},
                 {"gamma_db", jnum(r.gamma_db)},
                 {"shift_hat", r.shift_hat >= 0 ? json(r.shift_hat) : json(nullptr)},
                 {"verdict", r.verdict}});
  return {{"schema_version", schema_version}, {"kind", "detections"}, {"rows", a}};
}

// ---- mission ----------------------------------------------------------------

inline json estimate_json(const std::optional<locate::LocalizationEstimate>& e) {
  if (!e) return nullptr;
  json j = {{"status", locate::to_string(e->status)},
            {"iterations", e->iterations},
            {"converged", e->converged},
            {"n_valid", e->n_valid}};
  j["xy"] = e->status == locate::Status::ok ? vec(e->m_hat) : json(nullptr);
  return j;
}

// One JSON object per line: ue, stage, time, estimate, error.
inline void write_estimates_jsonl(std::ostream& os, const mission::MissionReport& r) {
  for (const auto& u : r.ues) {
    for (int k = 0; k < 2; ++k) {
      const auto& e = k == 0 ? u.est.initial : u.est.refined;
      if (!e) continue;
      json j = {{"schema_version", schema_version},
                {"seed", r.seed},
                {"ue", u.ue_id},
                {"stage", k == 0 ? "initial" : "refined"},
                {"time_s", jnum(k == 0 ? u.est.t_initial_s : u.est.t_refined_s)},
                {"estimate", estimate_json(e)},
                {"le_m", jnum(k == 0 ? u.le_initial : u.le_refined)}};
      os << j.dump() << "\n";
    }
  }
}

// Per-UE table: flight time to each estimate (min) and localization error (m).
inline json le_table_json(const mission::MissionReport& r) {
  json t = json::array();
  for (const auto& u : r.ues)
    t.push_back({{"ue", u.ue_id},
                 {"band", u.band},
                 {"shift", u.shift},
                 {"los", u.los},
                 {"truth", vec(u.truth)},
                 {"n_records", u.n_records},
                 {"flight_min_initial", jnum(u.est.t_initial_s / 60.0)},
                 {"flight_min_refined", jnum(u.est.t_refined_s / 60.0)},
                 {"le_m_initial", jnum(u.le_initial)},
                 {"le_m_refined", jnum(u.le_refined)}});
  return t;
}

inline json mission_report_json(const mission::MissionReport& r, const ScenarioFile& cfg, bool with_log = true) {
  json phases = json::array();
  for (const auto& p : r.phases)
    phases.push_back({{"phase", p.phase}, {"t_start_s", p.t_start}, {"t_end_s", p.t_end},
                      {"duration_s", p.t_end - p.t_start}});
  json j = {{"schema_version", schema_version},
            {"kind", "mission_report"},
            {"scenario", r.scenario},
            {"seed", r.seed},
            {"config", to_json(cfg)},
            {"phases", phases},
            {"summary",
             {{"total_time_s", r.total_time_s},
              {"initial_phase_s", r.initial_phase_s},
              {"receptions", r.receptions},
              {"acquisitions", r.acquisitions},
              {"false_positives", r.false_positives},
              {"records", r.log.size()},
              {"ale_m_initial", jnum(r.ale_initial)},
              {"ale_m_refined", jnum(r.ale_refined)}}},
            {"table", le_table_json(r)}};
  json est = json::array();
  for (const auto& u : r.ues)
    est.push_back({{"ue", u.ue_id}, {"initial", estimate_json(u.est.initial)}, {"refined", estimate_json(u.est.refined)}});
  j["estimates"] = est;
  if (with_log) {
    json log = json::array();
    for (const auto& m : r.log) {
      json g = json::object();
      for (const auto& [ue, per] : m.per_antenna_gamma) {
        json a = json::array();
        for (const auto& v : per) a.push_back(jnum(v));
        g[std::to_string(ue)] = a;
      }
      log.push_back({{"r", m.r}, {"t_s", m.timestamp_s}, {"xy", vec(m.uav_xy)}, {"phase", m.phase}, {"gamma_db", g}});
    }
    j["log"] = log;
  }
  return j;
}

inline void write_le_table_csv(std::ostream& os, const mission::MissionReport& r) {
  os << "ue,band,shift,los,n_records,flight_min_initial,flight_min_refined,le_m_initial,le_m_refined\n";
  for (const auto& u : r.ues)
    os << u.ue_id << "," << u.band << "," << u.shift << "," << (u.los ? 1 : 0) << "," << u.n_records << ","
       << num(u.est.t_initial_s / 60.0) << "," << num(u.est.t_refined_s / 60.0) << "," << num(u.le_initial) << ","
       << num(u.le_refined) << "\n";
}

// ---- misid grid -------------------------------------------------------------

inline constexpr const char* grid_header =
    "bandwidth,ub,delay_spread_s,power_spread_db,trials,misid,p_misid,ci_lo,ci_hi,missed,p_missed,missed_ues,no_sync,"
    "ci_method";

inline void write_grid_csv(std::ostream& os, const MisidGrid& g, std::optional<int> only_ub = std::nullopt) {
  os << grid_header << "\n";
  for (const auto& c : g.cells) {
    if (only_ub && c.ub != *only_ub) continue;
    auto p = c.p_misid(), q = c.p_missed();
    os << c.bandwidth << "," << c.ub << "," << num(c.delay_s) << "," << num(c.power_db) << "," << c.trials << ","
       << c.misid << "," << num(p.p) << "," << num(p.lo) << "," << num(p.hi) << "," << c.missed << "," << num(q.p)
       << "," << c.missed_ues << "," << c.no_sync << "," << g.ci_method << "\n";
  }
}

inline json grid_json(const MisidGrid& g, const MisidSpec& s) {
  json cells = json::array();
  for (const auto& c : g.cells) {
    auto p = c.p_misid(), q = c.p_missed();
    cells.push_back({{"bandwidth", c.bandwidth},
                     {"ub", c.ub},
                     {"delay_spread_s", c.delay_s},
                     {"power_spread_db", c.power_db},
                     {"trials", c.trials},
                     {"misid", c.misid},
                     {"p_misid", p.p},
                     {"ci", {p.lo, p.hi}},
                     {"missed", c.missed},
                     {"p_missed", q.p},
                     {"missed_ues", c.missed_ues},
                     {"no_sync", c.no_sync}});
  }
  json bws = json::array();
  for (const auto& b : s.bandwidths) bws.push_back({{"name", b.name}, {"srs", to_json(b.srs)}});
  return {{"schema_version", schema_version},
          {"kind", "misid_grid"},
          {"ci_method", g.ci_method},
          {"seed", s.seed},
          {"trials", s.trials},
          {"snr_db", s.snr_db},
          {"rician_k_db", s.rician_k_db},
          {"n_diffuse", s.n_diffuse},
          {"max_excess_s", s.max_excess_s},
          {"bandwidths", bws},
          {"cells", cells}};
}

// ---- localization CDF -------------------------------------------------------

inline rvec le_values(const LocCdf& c, bool refined) {
  rvec v;
  for (const auto& s : c.samples) {
    const auto& x = refined ? s.le_refined : s.le_initial;
    if (x) v.push_back(*x);
  }
  return v;
}

inline void write_cdf_csv(std::ostream& os, const LocCdf& c) {
  os << "scenario,stage,le_m,cdf\n";
  for (int k = 0; k < 2; ++k)
    for (const auto& p : empirical_cdf(le_values(c, k == 1)))
      os << c.scenario << "," << (k ? "refined" : "initial") << "," << num(p.x) << "," << num(p.f) << "\n";
}

struct UeRow {
  int ue_id = 0;
  bool los = true;
  int n_initial = 0, n_refined = 0;
  double flight_min_initial = 0, flight_min_refined = 0;
  double le_initial_mean = 0, le_initial_std = 0, le_refined_mean = 0, le_refined_std = 0;
};

inline double mean(const rvec& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}
inline double stddev(const rvec& v) {
  if (v.size() < 2) return 0;
  double m = mean(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

// Seed-averaged per-UE table.
inline std::vector<UeRow> ue_table(const LocCdf& c) {
  std::map<int, std::array<rvec, 4>> acc;  // le_i, le_r, t_i, t_r
  std::map<int, bool> los;
  for (const auto& s : c.samples) {
    auto& a = acc[s.ue_id];
    los[s.ue_id] = s.los;
    if (s.le_initial) a[0].push_back(*s.le_initial);
    if (s.le_refined) a[1].push_back(*s.le_refined);
    if (std::isfinite(s.t_initial_s)) a[2].push_back(s.t_initial_s / 60.0);
    if (std::isfinite(s.t_refined_s)) a[3].push_back(s.t_refined_s / 60.0);
  }
  std::vector<UeRow> out;
  for (const auto& [id, a] : acc) {
    UeRow r;
    r.ue_id = id;
    r.los = los[id];
    r.n_initial = static_cast<int>(a[0].size());
    r.n_refined = static_cast<int>(a[1].size());
    r.le_initial_mean = mean(a[0]);
    r.le_initial_std = stddev(a[0]);
    r.le_refined_mean = mean(a[1]);
    r.le_refined_std = stddev(a[1]);
    r.flight_min_initial = mean(a[2]);
    r.flight_min_refined = mean(a[3]);
    out.push_back(r);
  }
  return out;
}

inline void write_ue_table_csv(std::ostream& os, const LocCdf& c) {
  os << "scenario,ue,los,flight_min_initial,flight_min_refined,le_m_initial_mean,le_m_initial_std,le_m_refined_mean,"
        "le_m_refined_std,n_initial,n_refined\n";
  for (const auto& r : ue_table(c))
    os << c.scenario << "," << r.ue_id << "," << (r.los ? 1 : 0) << "," << num(r.flight_min_initial) << ","
       << num(r.flight_min_refined) << "," << num(r.le_initial_mean) << "," << num(r.le_initial_std) << ","
       << num(r.le_refined_mean) << "," << num(r.le_refined_std) << "," << r.n_initial << "," << r.n_refined << "\n";
}

inline json loc_cdf_json(const LocCdf& c) {
  json seeds = json::array();
  for (const auto& s : c.seeds)
    seeds.push_back({{"seed", s.seed},
                     {"ale_m_initial", jnum(s.ale_initial)},
                     {"ale_m_refined", jnum(s.ale_refined)},
                     {"initial_phase_s", s.initial_phase_s},
                     {"total_time_s", s.total_time_s}});
  json samples = json::array();
  for (const auto& s : c.samples)
    samples.push_back({{"seed", s.seed},
                       {"ue", s.ue_id},
                       {"los", s.los},
                       {"le_m_initial", jnum(s.le_initial)},
                       {"le_m_refined", jnum(s.le_refined)},
                       {"t_s_initial", jnum(s.t_initial_s)},
                       {"t_s_refined", jnum(s.t_refined_s)}});
  json table = json::array();
  for (const auto& r : ue_table(c))
    table.push_back({{"ue", r.ue_id},
                     {"los", r.los},
                     {"flight_min_initial", jnum(r.flight_min_initial)},
                     {"flight_min_refined", jnum(r.flight_min_refined)},
                     {"le_m_initial", {jnum(r.le_initial_mean), jnum(r.le_initial_std)}},
                     {"le_m_refined", {jnum(r.le_refined_mean), jnum(r.le_refined_std)}}});
  return {{"schema_version", schema_version},
          {"kind", "loc_cdf"},
          {"scenario", c.scenario},
          {"ale_m_initial", jnum(c.ale_initial)},
          {"ale_m_refined", jnum(c.ale_refined)},
          {"table", table},
          {"seeds", seeds},
          {"samples", samples}};
}

// ---- reading results back ---------------------------------------------------

inline void expect_kind(const json& j, const std::string& kind, const std::string& where) {
  if (!j.is_object() || j.value("kind", std::string{}) != kind)
    throw FormatError(where + ": expected a " + kind + " result");
  if (j.value("schema_version", -1) != schema_version) throw FormatError(where + ": unsupported schema_version");
}

inline std::optional<double> opt_num(const json& j, const char* k) {
  if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
  return j.at(k).get<double>();
}

inline LocCdf loc_cdf_from_json(const json& j, const std::string& where) {
  expect_kind(j, "loc_cdf", where);
  try {
    LocCdf c;
    c.scenario = j.at("scenario").get<std::string>();
    c.ale_initial = opt_num(j, "ale_m_initial");
    c.ale_refined = opt_num(j, "ale_m_refined");
    for (const auto& s : j.at("seeds"))
      c.seeds.push_back({s.at("seed").get<std::uint64_t>(), opt_num(s, "ale_m_initial"), opt_num(s, "ale_m_refined"),
                         s.at("initial_phase_s").get<double>(), s.at("total_time_s").get<double>()});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : j.at("samples"))
      c.samples.push_back({s.at("seed").get<std::uint64_t>(), s.at("ue").get<int>(), s.at("los").get<bool>(),
                           opt_num(s, "le_m_initial"), opt_num(s, "le_m_refined"),
                           opt_num(s, "t_s_initial").value_or(nan), opt_num(s, "t_s_refined").value_or(nan)});
    return c;
  } catch (const json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
}

inline MisidGrid grid_from_json(const json& j, const std::string& where) {
  expect_kind(j, "misid_grid", where);
  try {
    MisidGrid g;
    g.ci_method = j.at("ci_method").get<std::string>();
    for (const auto& c : j.at("cells")) {
      MisidCell x;
      x.bandwidth = c.at("bandwidth").get<std::string>();
      x.ub = c.at("ub").get<int>();
      x.delay_s = c.at("delay_spread_s").get<double>();
      x.power_db = c.at("power_spread_db").get<double>();
      x.trials = c.at("trials").get<long>();
      x.misid = c.at("misid").get<long>();
      x.missed = c.at("missed").get<long>();
      x.missed_ues = c.at("missed_ues").get<long>();
      x.no_sync = c.at("no_sync").get<long>();
      g.cells.push_back(x);
    }
    return g;
  } catch (const json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
}

}  // namespace uavsense::harness
