#pragma once

#include <map>
#include <optional>

#include "uavsense/core/types.hpp"

namespace uavsense::locate {

struct Measurement {
  int r = 0;
  Vec2 uav_xy;
  double timestamp_s = 0;
  // ue_id -> per-antenna gamma in dB (nullopt = missed on that antenna)
  std::map<int, std::vector<std::optional<double>>> per_antenna_gamma;
  std::string phase;
};

// Best antenna for UE u at this record; nullopt if every antenna missed.
inline std::optional<double> select_antenna(const Measurement& meas, int ue) {
  auto it = meas.per_antenna_gamma.find(ue);
  if (it == meas.per_antenna_gamma.end()) return std::nullopt;
  std::optional<double> best;
  for (const auto& g : it->second)
    if (g && std::isfinite(*g) && (!best || *g > *best)) best = g;
  return best;
}

struct Weighted {
  rvec weights;                // normalized linear amplitude, max = 1
  std::vector<std::size_t> valid;  // indices with weight >= threshold
};

// Linear (non-negative) series normalized by its maximum.
inline Weighted normalize_linear_and_filter(const rvec& lin, double gamma_th = 0.6) {
  if (lin.empty()) throw ConfigError("normalize: empty series");
  double mx = 0;
  for (double v : lin)
    if (std::isfinite(v)) mx = std::max(mx, v);
  if (!(mx > 0)) throw ConfigError("normalize: no positive value");
  Weighted w;
  w.weights.resize(lin.size());
  for (std::size_t i = 0; i < lin.size(); ++i) {
    double v = lin[i];
    w.weights[i] = std::isfinite(v) && v > 0 ? (v == mx ? 1.0 : v / mx) : 0.0;
    if (w.weights[i] >= gamma_th) w.valid.push_back(i);
  }
  return w;
}

// dB values go to linear amplitude before normalizing by the row maximum.
inline Weighted normalize_and_filter(const rvec& gamma_db, double gamma_th = 0.6) {
  if (gamma_db.empty()) throw ConfigError("normalize: empty series");
  double mx = -std::numeric_limits<double>::infinity();
  for (double g : gamma_db)
    if (std::isfinite(g)) mx = std::max(mx, g);
  if (!std::isfinite(mx)) throw ConfigError("normalize: no finite value");
  rvec lin(gamma_db.size());
  for (std::size_t i = 0; i < gamma_db.size(); ++i)
    lin[i] = std::isfinite(gamma_db[i]) ? std::pow(10.0, (gamma_db[i] - mx) / 20.0) : 0.0;
  return normalize_linear_and_filter(lin, gamma_th);
}

struct MeanShiftOptions {
  double hx = 1, hy = 1;
  double delta = 1e-6;
  int i_max = 50;
  std::optional<Vec2> init;  // default: weighted centroid
};

enum class Status { ok, no_valid_samples, not_detected };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::no_valid_samples: return "no_valid_samples";
    case Status::not_detected: return "not_detected";
  }
  return "?";
}

struct LocalizationEstimate {
  int ue_id = 0;
  Vec2 m_hat;
  int iterations = 0;
  bool converged = false;
  int n_valid = 0;
  Status status = Status::ok;
  std::vector<Vec2> trajectory;  // iterates, including the initial point
};

inline Vec2 weighted_centroid(const std::vector<Vec2>& pts, const rvec& w) {
  double sx = 0, sy = 0, sw = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    sx += w[i] * pts[i].x;
    sy += w[i] * pts[i].y;
    sw += w[i];
  }
  return {sx / sw, sy / sw};
}

// One Gaussian-kernel weighted update. Exponents are shifted by their minimum
// so far-away iterates do not underflow every kernel to zero.
inline Vec2 mean_shift_step(const std::vector<Vec2>& pts, const rvec& w, Vec2 m, double hx,
                            double hy) {
  rvec q(pts.size());
  double qmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double dx = (pts[i].x - m.x) / hx, dy = (pts[i].y - m.y) / hy;
    q[i] = 0.5 * (dx * dx + dy * dy);
    qmin = std::min(qmin, q[i]);
  }
  double sx = 0, sy = 0, sw = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double k = w[i] * std::exp(-(q[i] - qmin));
    sx += k * pts[i].x;
    sy += k * pts[i].y;
    sw += k;
  }
  return {sx / sw, sy / sw};
}

inline LocalizationEstimate mean_shift(const std::vector<Vec2>& pts, const rvec& w,
                                       const MeanShiftOptions& opt) {
  if (!(opt.hx > 0 && opt.hy > 0) || !std::isfinite(opt.hx) || !std::isfinite(opt.hy))
    throw ConfigError("mean_shift: bandwidths must be positive");
  if (pts.size() != w.size()) throw ConfigError("mean_shift: size mismatch");
  LocalizationEstimate est;
  est.n_valid = static_cast<int>(pts.size());
  if (pts.empty()) {
    est.status = Status::no_valid_samples;
    return est;
  }
  Vec2 m = opt.init ? *opt.init : weighted_centroid(pts, w);
  est.trajectory.push_back(m);
  for (int i = 0; i < opt.i_max; ++i) {
    Vec2 nm = mean_shift_step(pts, w, m, opt.hx, opt.hy);
    est.iterations = i + 1;
    est.trajectory.push_back(nm);
    double step = (nm - m).norm();
    m = nm;
    if (step < opt.delta) {
      est.converged = true;
      break;
    }
  }
  est.m_hat = m;
  return est;
}

// Full per-UE pipeline over a measurement log.
inline LocalizationEstimate localize(const std::vector<Measurement>& log, int ue, double gamma_th,
                                     MeanShiftOptions opt) {
  std::vector<Vec2> pos;
  rvec g;
  for (const auto& meas : log) {
    auto s = select_antenna(meas, ue);
    if (!s) continue;
    pos.push_back(meas.uav_xy);
    g.push_back(*s);
  }
  LocalizationEstimate est;
  est.ue_id = ue;
  if (g.empty()) {
    est.status = Status::not_detected;
    return est;
  }
  Weighted nw = normalize_and_filter(g, gamma_th);
  std::vector<Vec2> vp;
  rvec vw;
  for (auto i : nw.valid) {
    vp.push_back(pos[i]);
    vw.push_back(nw.weights[i]);
  }
  est = mean_shift(vp, vw, opt);
  est.ue_id = ue;
  return est;
}

inline double localization_error(Vec2 m_hat, Vec2 m_true) { return (m_hat - m_true).norm(); }

inline double average_error(const rvec& le) {
  double s = 0;
  int n = 0;
  for (double v : le)
    if (std::isfinite(v)) {
      s += v;
      ++n;
    }
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace uavsense::locate
