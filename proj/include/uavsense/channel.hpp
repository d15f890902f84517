#pragma once

#include <algorithm>
#include <functional>
#include <optional>

#include "uavsense/core/rng.hpp"
#include "uavsense/core/types.hpp"

namespace uavsense::channel {

// ---- antennas -------------------------------------------------------------

// Gain table over azimuth/elevation in degrees, bilinear interpolation.
// az in [0,360) wraps, el in [-90,90] clamps.
struct TabulatedPattern {
  rvec az_deg, el_deg;
  std::vector<rvec> gain_db;  // [el][az]

  // Combine a horizontal cut H(az) (at el=0) and a vertical cut V(el) into a
  // 2-D table: G(az,el) = H(az) + V(el) - V(0).
  static TabulatedPattern from_cuts(const rvec& az, const rvec& h_db, const rvec& el,
                                    const rvec& v_db) {
    if (az.size() != h_db.size() || el.size() != v_db.size() || az.empty() || el.empty())
      throw ConfigError("pattern cuts: size mismatch");
    TabulatedPattern t;
    t.az_deg = az;
    t.el_deg = el;
    // V(0) by linear interpolation of the vertical cut
    double v0 = v_db.front();
    for (std::size_t i = 0; i + 1 < el.size(); ++i)
      if (el[i] <= 0 && el[i + 1] >= 0) {
        double f = el[i + 1] > el[i] ? (0 - el[i]) / (el[i + 1] - el[i]) : 0;
        v0 = v_db[i] + f * (v_db[i + 1] - v_db[i]);
      }
    t.gain_db.assign(el.size(), rvec(az.size()));
    for (std::size_t i = 0; i < el.size(); ++i)
      for (std::size_t j = 0; j < az.size(); ++j) t.gain_db[i][j] = h_db[j] + v_db[i] - v0;
    t.check();
    return t;
  }

  void check() const {
    if (az_deg.empty() || el_deg.empty() || gain_db.size() != el_deg.size())
      throw ConfigError("tabulated pattern: bad dimensions");
    for (auto& r : gain_db)
      if (r.size() != az_deg.size()) throw ConfigError("tabulated pattern: ragged table");
    if (!std::is_sorted(az_deg.begin(), az_deg.end()) ||
        !std::is_sorted(el_deg.begin(), el_deg.end()))
      throw ConfigError("tabulated pattern: axes must be ascending");
  }

  double lookup(double az, double el) const {
    az = std::fmod(az, 360.0);
    if (az < 0) az += 360.0;
    el = std::clamp(el, el_deg.front(), el_deg.back());
    // elevation bracket
    std::size_t i1 = std::upper_bound(el_deg.begin(), el_deg.end(), el) - el_deg.begin();
    std::size_t i0 = i1 == 0 ? 0 : i1 - 1;
    if (i1 >= el_deg.size()) i1 = el_deg.size() - 1;
    double fe = (i1 != i0) ? (el - el_deg[i0]) / (el_deg[i1] - el_deg[i0]) : 0.0;
    // azimuth bracket, wrapping past the last sample back to the first
    const std::size_t na = az_deg.size();
    std::size_t j1 = std::upper_bound(az_deg.begin(), az_deg.end(), az) - az_deg.begin();
    std::size_t j0;
    double fa;
    if (j1 == 0 || j1 == na) {
      j0 = na - 1;
      j1 = 0;
      double span = az_deg[0] + 360.0 - az_deg[na - 1];
      double d = az >= az_deg[na - 1] ? az - az_deg[na - 1] : az + 360.0 - az_deg[na - 1];
      fa = span > 0 ? d / span : 0.0;
      if (na == 1) fa = 0;
    } else {
      j0 = j1 - 1;
      fa = (az - az_deg[j0]) / (az_deg[j1] - az_deg[j0]);
    }
    auto g = [&](std::size_t i, std::size_t j) { return gain_db[i][j]; };
    double a = g(i0, j0) + fa * (g(i0, j1) - g(i0, j0));
    double b = g(i1, j0) + fa * (g(i1, j1) - g(i1, j0));
    return a + fe * (b - a);
  }
};

struct AntennaPattern {
  enum class Kind { dipole, tabulated } kind = Kind::dipole;
  Vec3 axis{1, 0, 0};  // dipole axis
  TabulatedPattern table;
  double floor_db = -40.0;
};

inline constexpr double dipole_peak_dbi = 2.1484;  // 10log10(1.64)

// Half-wave dipole: G = 1.64 (cos(pi/2 cos psi) / sin psi)^2, psi measured from the axis.
inline double dipole_gain_db(const Vec3& axis, const Vec3& dir, double floor_db = -40.0) {
  double c = std::clamp(axis.unit().dot(dir.unit()), -1.0, 1.0);
  double s2 = 1.0 - c * c;
  if (s2 < 1e-18) return floor_db;
  double g = 1.64 * std::pow(std::cos(pi / 2.0 * c), 2) / s2;
  return std::max(db10(std::max(g, 1e-300)), floor_db);
}

// Direction is from the antenna towards the source, in the UAV frame.
inline double antenna_gain(const AntennaPattern& p, const Vec3& dir) {
  if (p.kind == AntennaPattern::Kind::dipole) return dipole_gain_db(p.axis, dir, p.floor_db);
  Vec3 d = dir.unit();
  double az = std::atan2(d.y, d.x) * 180.0 / pi;
  double el = std::asin(std::clamp(d.z, -1.0, 1.0)) * 180.0 / pi;
  return p.table.lookup(az, el);
}

struct Antenna {
  Vec3 offset;
  AntennaPattern pattern;
};

// ---- geometry -------------------------------------------------------------

struct UavState {
  Vec3 position;
  Vec3 velocity;
  std::vector<Antenna> antennas;

  static constexpr double max_speed = 6.0;

  // Two horizontal dipoles 30 cm apart, axes 90 degrees apart.
  static std::vector<Antenna> default_antennas() {
    Antenna a0, a1;
    a0.offset = {-0.15, 0, 0};
    a0.pattern.axis = {1, 0, 0};
    a1.offset = {0.15, 0, 0};
    a1.pattern.axis = {0, 1, 0};
    return {a0, a1};
  }
};

enum class ChannelMode { rural, urban };

struct UeProfile {
  int ue_id = 0;
  Vec3 position;
  int band_id = 0;
  int shift_index_w = 0;
  double tx_power_dbm = 23.0;
  double cfo_hz = 0.0;
  double timing_advance_s = 0.0;
  double clock_drift_ppm = 0.0;
  bool los = true;
  ChannelMode mode = ChannelMode::rural;
  // Fixed gain of the UE's randomly oriented antenna towards the sky.
  double antenna_gain_db = 0.0;
};

struct ChannelPath {
  cplx gain;
  double delay_s = 0;
  double doppler_hz = 0;
};

struct PropagationModel {
  double fc_hz = 2.4e9;
  // rural: free space; urban: log-distance with this exponent beyond 1 m
  double pl_exponent = 3.0;
  double blockage_db = 15.0;
  int n_refl = 2;
  // total reflected power relative to the unblocked direct path
  double refl_rel_db = -10.0;
  double max_excess_delay_s = 200e-9;
  double delay_decay_s = 100e-9;  // exponential power-delay profile constant
  bool reflections = true;

  static PropagationModel rural() { return {}; }
  static PropagationModel urban() {
    PropagationModel m;
    m.n_refl = 4;
    m.refl_rel_db = -3.0;
    m.max_excess_delay_s = 800e-9;
    m.delay_decay_s = 300e-9;
    return m;
  }
};

inline double free_space_loss_db(double d_m, double fc_hz) {
  return 20.0 * std::log10(4.0 * pi * d_m * fc_hz / c_light);
}

inline double path_loss_db(double d_m, ChannelMode mode, const PropagationModel& m) {
  if (mode == ChannelMode::rural) return free_space_loss_db(d_m, m.fc_hz);
  double d = std::max(d_m, 1.0);
  return free_space_loss_db(1.0, m.fc_hz) + 10.0 * m.pl_exponent * std::log10(d);
}

// Random per-UE antenna gain: a dipole with a uniformly random axis seen from a
// fixed direction, i.e. the pattern evaluated at cos(psi) ~ U(-1,1).
inline double draw_ue_antenna_gain_db(std::uint64_t seed, double floor_db = -40.0) {
  auto g = rng::engine(seed);
  double c = rng::uniform(g, -1.0, 1.0);
  return dipole_gain_db({0, 0, 1}, {std::sqrt(1 - c * c), 0, c}, floor_db);
}

// Paths per UAV antenna. Path 0 is the direct path; reflected taps follow with
// strictly ascending delays. Gains exclude transmit power.
inline std::vector<std::vector<ChannelPath>> geometry_paths(const UeProfile& ue, const UavState& uav,
                                                            const PropagationModel& model,
                                                            std::uint64_t seed) {
  if ((ue.position - uav.position).norm() < 1e-9)
    throw GeometryError("UE and UAV positions coincide");
  const double lambda = c_light / model.fc_hz;
  std::vector<std::vector<ChannelPath>> out;
  for (std::size_t a = 0; a < uav.antennas.size(); ++a) {
    const Antenna& ant = uav.antennas[a];
    Vec3 rx = uav.position + ant.offset;
    Vec3 dv = ue.position - rx;
    double d = dv.norm();
    if (d < 1e-9) throw GeometryError("UE and UAV antenna positions coincide");
    double tau = d / c_light;
    double pl = path_loss_db(d, ue.mode, model);
    double g_rx = antenna_gain(ant.pattern, dv);
    double p_direct_db = -pl + g_rx + ue.antenna_gain_db;
    double p_los_db = p_direct_db;
    if (!ue.los) p_direct_db -= model.blockage_db;

    std::vector<ChannelPath> paths;
    ChannelPath direct;
    direct.delay_s = tau;
    direct.gain = std::polar(std::sqrt(from_db10(p_direct_db)),
                             -2.0 * pi * std::fmod(d / lambda, 1.0));
    direct.doppler_hz = uav.velocity.dot(dv.unit()) / lambda;
    paths.push_back(direct);

    if (model.reflections && model.n_refl > 0) {
      // Draw order is independent of LoS state so NLoS differs only in path 0.
      auto g = rng::engine(rng::derive(seed, {static_cast<std::uint64_t>(ue.ue_id), a}));
      rvec ex(model.n_refl);
      for (auto& e : ex) e = rng::uniform(g, 0.0, model.max_excess_delay_s);
      std::sort(ex.begin(), ex.end());
      double min_step = 1e-12;
      double prev = 0;
      for (auto& e : ex) {
        e = std::max(e, prev + min_step);
        prev = e;
      }
      rvec pw(model.n_refl);
      double tot = 0;
      for (int i = 0; i < model.n_refl; ++i) tot += pw[i] = std::exp(-ex[i] / model.delay_decay_s);
      double p_refl = from_db10(p_los_db + model.refl_rel_db);
      double speed = uav.velocity.norm();
      for (int i = 0; i < model.n_refl; ++i) {
        ChannelPath r;
        r.delay_s = tau + ex[i];
        r.gain = rng::cgauss(g, p_refl * pw[i] / tot);
        double cos_aoa = rng::uniform(g, -1.0, 1.0);
        r.doppler_hz = speed * cos_aoa / lambda;
        paths.push_back(r);
      }
    }
    out.push_back(std::move(paths));
  }
  return out;
}

// ---- fractional delay -----------------------------------------------------

inline constexpr int interp_taps = 32;
inline constexpr double kaiser_beta = 8.0;

inline double interp_kernel(double x) {
  const double half = interp_taps / 2.0;
  if (std::abs(x) >= half) return 0.0;
  double s = std::abs(x) < 1e-12 ? 1.0 : std::sin(pi * x) / (pi * x);
  double r = x / half;
  double w = std::cyl_bessel_i(0.0, kaiser_beta * std::sqrt(1.0 - r * r)) /
             std::cyl_bessel_i(0.0, kaiser_beta);
  return s * w;
}

// Kernel sampled on a fine fractional grid; intermediate offsets interpolate
// linearly between neighbouring phases (error well below 1e-6).
struct KernelTable {
  static constexpr int phases = 2048;
  std::vector<std::array<double, interp_taps>> h;
  KernelTable() : h(phases + 1) {
    for (int p = 0; p <= phases; ++p) {
      double mu = static_cast<double>(p) / phases;
      for (int t = 0; t < interp_taps; ++t) h[p][t] = interp_kernel(mu - (t - interp_taps / 2 + 1));
    }
  }
  static const KernelTable& get() {
    static const KernelTable k;
    return k;
  }
};

// Band-limited evaluation of x at fractional index u. Exact copy on integers.
inline cplx interp_at(const cvec& x, double u) {
  double fl = std::floor(u);
  double mu = u - fl;
  long i = static_cast<long>(fl);
  const long n = static_cast<long>(x.size());
  if (mu < 1e-9 || mu > 1 - 1e-9) {
    long k = mu < 0.5 ? i : i + 1;
    return (k >= 0 && k < n) ? x[k] : cplx{};
  }
  const auto& kt = KernelTable::get();
  double ph = mu * KernelTable::phases;
  int p0 = std::min(static_cast<int>(ph), KernelTable::phases - 1);
  double f = ph - p0;
  const auto& h0 = kt.h[p0];
  const auto& h1 = kt.h[p0 + 1];
  cplx acc{};
  for (int t = 0; t < interp_taps; ++t) {
    long j = i + t - interp_taps / 2 + 1;
    if (j < 0 || j >= n) continue;
    acc += x[j] * (h0[t] + f * (h1[t] - h0[t]));
  }
  return acc;
}

// ---- propagation ----------------------------------------------------------

// Timing skew from clock drift, reset every second.
inline double drift_skew_s(double ppm, double t) {
  double tm = std::fmod(t, 1.0);
  if (tm < 0) tm += 1.0;
  return ppm * 1e-6 * tm;
}

inline double thermal_noise_mw(double fs_hz, double nf_db) {
  return from_db10(-174.0 + db10(fs_hz) + nf_db);
}

inline void add_noise(IqCapture& cap, double noise_mw, rng::Engine& g) {
  for (auto& v : cap.samples) v += rng::cgauss(g, noise_mw);
}

// Render the UE transmission `tx` (samples at tx.t0 + n/fs, full-scale units)
// through `paths` onto an output grid starting at out_t0 with out_len samples.
// Effective delay per path is tau - TA + drift skew.
inline IqCapture propagate_into(const IqCapture& tx, const std::vector<ChannelPath>& paths,
                                const UeProfile& ue, double out_t0, std::size_t out_len) {
  const double fs = tx.sample_rate_hz;
  if (fs <= 0) throw ConfigError("tx sample rate must be positive");
  IqCapture out;
  out.sample_rate_hz = fs;
  out.t0_s = out_t0;
  out.antenna_id = tx.antenna_id;
  out.center_freq_hz = tx.center_freq_hz;
  out.samples.assign(out_len, cplx{});
  const double amp = std::sqrt(from_db10(ue.tx_power_dbm));

  // nonzero runs of tx so silent stretches cost nothing
  std::vector<std::pair<long, long>> runs;
  const long ntx = static_cast<long>(tx.samples.size());
  for (long i = 0; i < ntx;) {
    if (tx.samples[i] == cplx{}) {
      ++i;
      continue;
    }
    long j = i;
    while (j < ntx && tx.samples[j] != cplx{}) ++j;
    runs.emplace_back(i, j);
    i = j;
  }
  const long halo = interp_taps / 2 + 1;
  const double skew_max = std::abs(ue.clock_drift_ppm) * 1e-6 * fs + 1;

  for (const auto& p : paths) {
    const double base_delay = p.delay_s - ue.timing_advance_s;
    const double nu = p.doppler_hz + ue.cfo_hz;
    for (auto [a, b] : runs) {
      // output indices whose source position can fall in [a-halo, b+halo)
      double off = (tx.t0_s + base_delay - out_t0) * fs;
      long lo = static_cast<long>(std::floor(a + off - halo - skew_max));
      long hi = static_cast<long>(std::ceil(b + off + halo + skew_max));
      lo = std::max(lo, 0L);
      hi = std::min(hi, static_cast<long>(out_len));
      for (long n = lo; n < hi; ++n) {
        double t = out_t0 + n / fs;
        double tau = base_delay + drift_skew_s(ue.clock_drift_ppm, t);
        double u = (t - tau - tx.t0_s) * fs;
        cplx v = interp_at(tx.samples, u);
        if (v == cplx{}) continue;
        double ph = 2.0 * pi * std::fmod(nu * t, 1.0);
        out.samples[n] += amp * p.gain * v * std::polar(1.0, ph);
      }
    }
  }
  return out;
}

// Same grid as the input. Noise is optional so several UEs can be superposed
// first and noised once.
inline IqCapture propagate(const IqCapture& tx, const std::vector<ChannelPath>& paths,
                           const UeProfile& ue, std::optional<double> noise_figure_db = std::nullopt,
                           rng::Engine* noise_rng = nullptr) {
  IqCapture out = propagate_into(tx, paths, ue, tx.t0_s, tx.samples.size());
  if (noise_figure_db) {
    if (!noise_rng) throw ConfigError("noise requested without a generator");
    add_noise(out, thermal_noise_mw(tx.sample_rate_hz, *noise_figure_db), *noise_rng);
  }
  return out;
}

inline IqCapture superpose(const std::vector<IqCapture>& caps) {
  if (caps.empty()) throw ConfigError("superpose: no captures");
  IqCapture out = caps.front();
  for (std::size_t i = 1; i < caps.size(); ++i) {
    const auto& c = caps[i];
    if (std::abs(c.sample_rate_hz - out.sample_rate_hz) > 1e-9 * out.sample_rate_hz)
      throw ConfigError("superpose: sample rate mismatch");
    if (std::abs(c.t0_s - out.t0_s) * out.sample_rate_hz > 1e-6)
      throw ConfigError("superpose: captures are not on the same grid");
    if (c.samples.size() > out.samples.size()) out.samples.resize(c.samples.size());
    for (std::size_t n = 0; n < c.samples.size(); ++n) out.samples[n] += c.samples[n];
  }
  return out;
}

}  // namespace uavsense::channel
