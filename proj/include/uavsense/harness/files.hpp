#pragma once

#include "uavsense/harness/composite.hpp"
#include "uavsense/harness/report.hpp"

// Capture (composite) and sweep spec files.
namespace uavsense::harness {

inline json to_json(const CompositeSpec& s) {
  json ues = json::array();
  for (const auto& u : s.ues)
    ues.push_back({{"id", u.ue_id},
                   {"shift", u.shift},
                   {"power_dbfs", u.power_dbfs},
                   {"offset_samples", u.offset_samples},
                   {"cfo_hz", u.cfo_hz}});
  return {{"schema_version", schema_version},
          {"kind", "capture"},
          {"srs", to_json(s.srs)},
          {"ues", ues},
          {"duplicate_band", s.duplicate_band},
          {"duplicate_k0", s.duplicate_k0},
          {"n_periods", s.n_periods},
          {"start_sample", s.start_sample},
          {"snr_db", s.snr_db ? json(*s.snr_db) : json(nullptr)},
          {"center_freq_hz", s.center_freq_hz},
          {"seed", s.seed}};
}

inline CompositeSpec composite_from_json(const json& j, const std::string& where = "$") {
  CompositeSpec s;
  ObjReader r(j, where);
  int ver = schema_version;
  r.opt("schema_version", ver);
  if (ver != schema_version) throw FormatError(where + ".schema_version: unsupported");
  std::string kind = "capture";
  r.opt("kind", kind);
  if (kind != "capture") throw FormatError(where + ".kind: expected capture");
  if (r.has("srs")) s.srs = srs_from_json(r.raw("srs"), where + ".srs");
  if (r.has("ues")) {
    const json& a = r.raw("ues");
    if (!a.is_array()) throw FormatError(where + ".ues: expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      ObjReader u(a[i], where + ".ues[" + std::to_string(i) + "]");
      CompositeUe x;
      x.ue_id = u.need<int>("id");
      x.shift = u.need<int>("shift");
      u.opt("power_dbfs", x.power_dbfs);
      u.opt("offset_samples", x.offset_samples);
      u.opt("cfo_hz", x.cfo_hz);
      u.finish();
      s.ues.push_back(x);
    }
  }
  r.opt("duplicate_band", s.duplicate_band);
  r.opt("duplicate_k0", s.duplicate_k0);
  r.opt("n_periods", s.n_periods);
  int start = static_cast<int>(s.start_sample);
  r.opt("start_sample", start);
  s.start_sample = start;
  if (r.has("snr_db")) {
    const json& v = r.raw("snr_db");
    s.snr_db = v.is_null() ? std::nullopt : std::optional<double>(ObjReader::convert<double>(v, where + ".snr_db"));
  }
  r.opt("center_freq_hz", s.center_freq_hz);
  r.opt("seed", s.seed);
  r.finish();
  validate(s);
  return s;
}

inline BandwidthSetting bandwidth_by_name(const std::string& name) {
  if (name == "1.4MHz" || name == "1.4") return bw_1m4();
  if (name == "13MHz" || name == "13") return bw_13m();
  throw ConfigError("unknown bandwidth '" + name + "' (1.4MHz or 13MHz)");
}

inline json to_json(const MisidSpec& s) {
  json bws = json::array();
  for (const auto& b : s.bandwidths) bws.push_back({{"name", b.name}, {"srs", to_json(b.srs)}});
  return {{"schema_version", schema_version},
          {"kind", "misid_grid"},
          {"ub", s.ub},
          {"delays_s", s.delays_s},
          {"powers_db", s.powers_db},
          {"bandwidths", bws},
          {"trials", s.trials},
          {"snr_db", s.snr_db},
          {"rician_k_db", s.rician_k_db},
          {"n_diffuse", s.n_diffuse},
          {"max_excess_s", s.max_excess_s},
          {"processing", to_json(s.proc)},
          {"seed", s.seed}};
}

// Axis: explicit list or {"start", "stop", "n"}.
inline rvec axis_from_json(const json& v, const std::string& where) {
  if (v.is_array()) return ObjReader::convert<rvec>(v, where);
  ObjReader r(v, where);
  double a = r.need<double>("start"), b = r.need<double>("stop");
  int n = r.need<int>("n");
  r.finish();
  if (n < 1) throw ConfigError(where + ".n must be >= 1");
  return linspace(a, b, n);
}

inline MisidSpec misid_spec_from_json(const json& j, const std::string& where = "$") {
  MisidSpec s;
  ObjReader r(j, where);
  int ver = schema_version;
  r.opt("schema_version", ver);
  if (ver != schema_version) throw FormatError(where + ".schema_version: unsupported");
  std::string kind = "misid_grid";
  r.opt("kind", kind);
  if (kind != "misid_grid") throw FormatError(where + ".kind: expected misid_grid");
  r.opt("ub", s.ub);
  if (r.has("delays_s")) s.delays_s = axis_from_json(r.raw("delays_s"), where + ".delays_s");
  if (r.has("powers_db")) s.powers_db = axis_from_json(r.raw("powers_db"), where + ".powers_db");
  if (r.has("bandwidths")) {
    const json& a = r.raw("bandwidths");
    if (!a.is_array()) throw FormatError(where + ".bandwidths: expected an array");
    s.bandwidths.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string w = where + ".bandwidths[" + std::to_string(i) + "]";
      if (a[i].is_string()) {
        s.bandwidths.push_back(bandwidth_by_name(a[i].get<std::string>()));
      } else {
        ObjReader b(a[i], w);
        BandwidthSetting x;
        x.name = b.need<std::string>("name");
        if (b.has("srs")) x.srs = srs_from_json(b.raw("srs"), w + ".srs");
        b.finish();
        s.bandwidths.push_back(x);
      }
    }
  }
  r.opt("trials", s.trials);
  r.opt("snr_db", s.snr_db);
  r.opt("rician_k_db", s.rician_k_db);
  r.opt("n_diffuse", s.n_diffuse);
  r.opt("max_excess_s", s.max_excess_s);
  if (r.has("processing")) s.proc = processing_from_json(r.raw("processing"), where + ".processing");
  r.opt("seed", s.seed);
  r.finish();
  s.validate();
  return s;
}

}  // namespace uavsense::harness
