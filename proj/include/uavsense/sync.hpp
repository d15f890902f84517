#pragma once

#include <optional>

#include "uavsense/core/types.hpp"

namespace uavsense::sync {

struct MetricTrace {
  rvec m;    // M[n] = |P[n]|^2 / R[n]^2
  rvec m_f;  // M averaged over the last L_CP values (causal)
};

// Sliding P[n], R[n] over two adjacent L-sample halves. Sums are kept in long
// double and rebuilt from scratch every `reanchor` steps so rounding cannot
// accumulate over long captures.
class RepetitionMetric {
 public:
  RepetitionMetric(const cplx* y, std::size_t len, int L, std::size_t reanchor = 4096)
      : y_(y), len_(len), L_(L), reanchor_(reanchor) {}

  std::size_t size() const { return len_ >= 2u * L_ ? len_ - 2u * L_ + 1 : 0; }

  rvec compute() {
    rvec out(size());
    for (std::size_t n = 0; n < out.size(); ++n) {
      if (n % reanchor_ == 0)
        rebuild(n);
      else
        slide(n);
      out[n] = value();
    }
    return out;
  }

  // Direct evaluation at one n (reference implementation).
  static double direct(const cplx* y, std::size_t n, int L) {
    std::complex<long double> p = 0;
    long double r = 0;
    std::size_t nz = 0;
    for (int l = 0; l < L; ++l) {
      std::complex<long double> a(y[n + l].real(), y[n + l].imag());
      std::complex<long double> b(y[n + l + L].real(), y[n + l + L].imag());
      p += a * std::conj(b);
      r += std::norm(a) + std::norm(b);
      nz += (y[n + l] != cplx{}) + (y[n + l + L] != cplx{});
    }
    r *= 0.5L;
    return finish(p, r, nz);
  }

 private:
  using lcplx = std::complex<long double>;
  lcplx at(std::size_t i) const { return {y_[i].real(), y_[i].imag()}; }

  void rebuild(std::size_t n) {
    p_ = 0;
    e_ = 0;
    nz_ = 0;
    for (int l = 0; l < L_; ++l) {
      p_ += at(n + l) * std::conj(at(n + l + L_));
      e_ += std::norm(at(n + l)) + std::norm(at(n + l + L_));
      nz_ += (y_[n + l] != cplx{}) + (y_[n + l + L_] != cplx{});
    }
  }

  void slide(std::size_t n) {
    // drop index n-1 from the first half, n-1+L from the second; add n+L-1, n+2L-1
    std::size_t o = n - 1;
    p_ -= at(o) * std::conj(at(o + L_));
    p_ += at(o + L_) * std::conj(at(o + 2 * L_));
    e_ -= std::norm(at(o));
    e_ += std::norm(at(o + 2 * L_));
    nz_ -= (y_[o] != cplx{});
    nz_ += (y_[o + 2 * L_] != cplx{});
  }

  static double finish(lcplx p, long double r, std::size_t nz) {
    if (nz == 0 || r <= 0) return 0.0;
    long double m = std::norm(p) / (r * r);
    return static_cast<double>(std::clamp(m, 0.0L, 1.0L));
  }
  double value() const { return finish(p_, 0.5L * e_, nz_); }

  const cplx* y_;
  std::size_t len_;
  int L_;
  std::size_t reanchor_;
  lcplx p_ = 0;
  long double e_ = 0;
  std::size_t nz_ = 0;
};

inline rvec filter_metric(const rvec& m, int l_cp) {
  const int w = std::max(l_cp, 1);
  rvec f(m.size());
  long double acc = 0;
  for (std::size_t n = 0; n < m.size(); ++n) {
    acc += m[n];
    if (n >= static_cast<std::size_t>(w)) acc -= m[n - w];
    // exact rebuild now and then, the window is short
    if (n % 4096 == 0) {
      acc = 0;
      for (std::size_t i = n + 1 >= static_cast<std::size_t>(w) ? n + 1 - w : 0; i <= n; ++i)
        acc += m[i];
    }
    f[n] = static_cast<double>(acc / w);
  }
  return f;
}

inline MetricTrace repetition_metric(const cplx* y, std::size_t len, int L, int l_cp) {
  if (len < 2u * L + 1) throw ConfigError("capture shorter than 2L+1 samples");
  MetricTrace t;
  t.m = RepetitionMetric(y, len, L).compute();
  t.m_f = filter_metric(t.m, l_cp);
  return t;
}

inline MetricTrace repetition_metric(const IqCapture& y, int L, int l_cp) {
  return repetition_metric(y.samples.data(), y.samples.size(), L, l_cp);
}

// First index where the filtered metric reaches a local maximum above m_th.
// A flat top (|D| <= delta) resolves to its first index.
inline std::optional<long> detect(const MetricTrace& trace, double m_th, double delta = 1e-4) {
  if (!(m_th > 0 && m_th < 1)) throw ConfigError("m_th must be in (0,1)");
  const rvec& f = trace.m_f;
  const long n_max = static_cast<long>(f.size()) - 1;  // D[n] needs f[n+1]
  auto D = [&](long n) { return f[n + 1] - f[n]; };
  for (long n = 1; n < n_max; ++n) {
    if (f[n] < m_th || !(D(n - 1) > delta)) continue;
    if (D(n) < -delta) return n;
    long k = n;
    while (k < n_max && std::abs(D(k)) <= delta) ++k;
    if (k < n_max && D(k) < -delta) return n;
    n = std::max(n, k - 1);
  }
  return std::nullopt;
}

struct SnrEstimate {
  double db = -60.0;
  bool saturated = false;
};

inline constexpr double snr_floor_db = -60.0;

inline SnrEstimate estimate_snr(double m_f_peak) {
  SnrEstimate s;
  if (m_f_peak >= 1.0) {
    s.saturated = true;
    s.db = std::numeric_limits<double>::infinity();
    return s;
  }
  double r = std::sqrt(std::max(m_f_peak, 0.0));
  double lin = r / (1.0 - r);
  s.db = lin > 0 ? std::max(db10(lin), snr_floor_db) : snr_floor_db;
  return s;
}

// Piecewise weights, delays in samples (T_s = 1).
inline double f0(double dt, double L, double l_cp) {
  if (dt >= -L - l_cp && dt < -l_cp) return (dt + l_cp + L) / L;
  if (dt >= -l_cp && dt < 0) return 1.0;
  if (dt >= 0 && dt < L) return 1.0 - dt / L;
  return 0.0;
}

inline double g0(double dt, double L, double l_cp) {
  if (dt >= -2 * L - l_cp && dt < -l_cp) return (dt + l_cp + 2 * L) / (2 * L);
  if (dt >= -l_cp && dt < 0) return 1.0;
  if (dt >= 0 && dt < 2 * L) return 1.0 - dt / (2 * L);
  return 0.0;
}

struct MetricComponent {
  double power = 1.0;
  double delay = 0.0;  // CP start relative to the evaluation index, samples
};

// Predicted M[n0]. Squared ratio because M carries |P|^2 / R^2.
inline double predict_metric(const std::vector<MetricComponent>& comps, int L, int l_cp) {
  if (comps.empty()) throw ConfigError("predict_metric: no components");
  double num = 0, den = 0;
  for (const auto& c : comps) {
    num += c.power * f0(c.delay, L, l_cp);
    den += c.power * g0(c.delay, L, l_cp);
  }
  if (den <= 0) return 0.0;
  double r = num / den;
  return r * r;
}

struct SyncState {
  long n_sync = 0;
  double eps_filtered = 0.0;
  double beta = 0.5;
  double last_metric = 0.0;
  double est_snr_db = snr_floor_db;
  long period_samples = 0;
  int q = 0;

  // Expected start of reception q. eps is (arrival - window start), so the
  // correction is added.
  double expected(int qq) const {
    return static_cast<double>(n_sync) + static_cast<double>(qq) * period_samples + eps_filtered;
  }
};

inline SyncState track(SyncState s, int q, double eps_hat) {
  if (s.beta < 0 || s.beta > 1) throw ConfigError("beta must be in [0,1]");
  s.eps_filtered = s.beta * eps_hat + (1.0 - s.beta) * s.eps_filtered;
  s.q = q;
  return s;
}

}  // namespace uavsense::sync
