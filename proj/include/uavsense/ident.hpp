#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "uavsense/core/fft.hpp"
#include "uavsense/core/types.hpp"
#include "uavsense/waveform.hpp"

namespace uavsense::ident {

struct DespreadSpectrum {
  cvec c;
  int band_id = 0;
};

// Tone amplitude scale: a received SRS whose mean sample power over the symbol
// is P despreads to a tone of amplitude sqrt(P).
inline double despread_scale(const waveform::SrsConfig& cfg) {
  return cfg.comb_ktc * std::sqrt(static_cast<double>(cfg.m_srs())) / cfg.n_fft;
}

inline DespreadSpectrum despread(const cplx* y, std::size_t len, long n_start,
                                 const waveform::SrsConfig& cfg, int band_id = 0) {
  cfg.validate();
  const int L = cfg.half_len();
  const int M = cfg.m_srs();
  if (n_start < 0 || static_cast<std::size_t>(n_start) + L > len)
    throw ConfigError("despread window out of range");
  cvec Y = fft::forward(y + n_start, L);
  const cvec ref = waveform::base_sequence(cfg).values;
  const double s = despread_scale(cfg);
  DespreadSpectrum d;
  d.band_id = band_id;
  d.c.resize(M);
  const int kk = cfg.k0 / cfg.comb_ktc;
  for (int m = 0; m < M; ++m) d.c[m] = Y[kk + m] * std::conj(ref[m]) * s;
  return d;
}

inline DespreadSpectrum despread(const IqCapture& y, long n_start, const waveform::SrsConfig& cfg,
                                 int band_id = 0) {
  return despread(y.samples.data(), y.samples.size(), n_start, cfg, band_id);
}

struct DetectionComponent {
  double f_hat = 0;  // cycles per subcarrier index, [0,1)
  cplx a_hat;
  double gamma_db = 0;  // 20 log10 |a_hat|
  int shift_hat = -1;
  double eps_hat = 0;  // arrival minus window start, samples
  int iter = 0;
};

enum class Refine { automatic, always, never };

struct MpOptions {
  int oversample = 4;
  Refine refine = Refine::automatic;  // automatic: only when oversample < 4
  // Weight of i*log(M) in the BIC. With M = 24, K equal tones are kept up to
  // K = 4 only below 24 ln(4/3) / ln 24 = 2.17, and pure noise is rejected in
  // 90% of draws only above about 2.12.
  double bic_penalty = 2.15;
  // Stop only when BIC strictly increases (ties keep iterating).
  bool strict_increase = false;
  int max_components = 16;
  // Sweeps re-fitting every component against the others after each new atom.
  // 0 gives plain greedy pursuit.
  int cycles = 8;
};

struct MpResult {
  std::vector<DetectionComponent> components;
  rvec bic;              // bic[i] for i = 0..iterations evaluated
  rvec residual_energy;  // mean |c^(i)|^2, same indexing
};

// Phasors by recurrence; M is a few dozen, so the rounding drift stays ~1e-15.
inline cplx project(const cvec& c, double f) {
  const cplx step = std::polar(1.0, -2.0 * pi * f);
  cplx z = 1.0, acc{};
  for (const auto& v : c) {
    acc += v * z;
    z *= step;
  }
  return acc / static_cast<double>(c.size());
}

inline double wrap01(double f) {
  f = std::fmod(f, 1.0);
  if (f < 0) f += 1.0;
  if (f >= 1.0) f -= 1.0;
  return f;
}

namespace detail {

inline void subtract_atom(cvec& r, cplx a, double f) {
  const cplx step = std::polar(1.0, 2.0 * pi * f);
  cplx z = a;
  for (auto& v : r) {
    v -= z;
    z *= step;
  }
}

// Strongest dictionary atom of r (K bins), optionally refined.
inline double best_atom(const cvec& r, std::size_t K, bool refine) {
  cvec C = fft::forward_padded(r, K);
  std::size_t kb = 0;
  double best = -1;
  for (std::size_t k = 0; k < K; ++k) {
    double v = std::norm(C[k]);
    if (v > best) {
      best = v;
      kb = k;
    }
  }
  double f = static_cast<double>(kb) / K;
  if (refine) {
    double a = std::log(std::abs(C[(kb + K - 1) % K]) + 1e-300);
    double b = std::log(std::abs(C[kb]) + 1e-300);
    double cc = std::log(std::abs(C[(kb + 1) % K]) + 1e-300);
    double den = a - 2 * b + cc;
    if (den < 0) f = wrap01((kb + 0.5 * (a - cc) / den) / static_cast<double>(K));
  }
  return f;
}

}  // namespace detail

inline MpResult matching_pursuit(const DespreadSpectrum& sp, int L, const MpOptions& opt = {}) {
  if (opt.oversample < 1) throw ConfigError("oversample must be >= 1");
  MpResult res;
  const cvec& c0 = sp.c;
  const std::size_t M = c0.size();
  if (M == 0) return res;
  const double e0 = energy(c0) / M;
  if (!(e0 > 0) || !std::isfinite(e0)) return res;
  const std::size_t K = static_cast<std::size_t>(opt.oversample) * L;
  if (K < M) throw ConfigError("dictionary smaller than the spectrum length");
  const bool refine = opt.refine == Refine::always ||
                      (opt.refine == Refine::automatic && opt.oversample < 4);
  const double floor_e = 1e-20 * e0;
  const double logM = std::log(static_cast<double>(M));
  auto bic = [&](int i, double e) {
    return opt.bic_penalty * i * logM + M * std::log(std::max(e, floor_e));
  };

  cvec r = c0;
  res.bic.push_back(bic(0, e0));
  res.residual_energy.push_back(e0);
  std::vector<DetectionComponent> comps;
  const int max_it = std::min<int>(opt.max_components, static_cast<int>(M));
  for (int i = 1; i <= max_it; ++i) {
    DetectionComponent d;
    d.f_hat = detail::best_atom(r, K, refine);
    d.a_hat = project(r, d.f_hat);
    d.iter = i;
    detail::subtract_atom(r, d.a_hat, d.f_hat);
    std::vector<DetectionComponent> trial = comps;
    trial.push_back(d);

    // cyclic re-fit: component j sees the residual plus its own atom
    for (int sweep = 0; sweep < opt.cycles && trial.size() > 1; ++sweep) {
      bool changed = false;
      for (auto& t : trial) {
        cvec rj = r;
        detail::subtract_atom(rj, -t.a_hat, t.f_hat);
        double f = detail::best_atom(rj, K, refine);
        cplx a = project(rj, f);
        cvec cand = rj;
        detail::subtract_atom(cand, a, f);
        if (energy(cand) < energy(r) * (1 - 1e-12) ||
            (f == t.f_hat && energy(cand) <= energy(r))) {
          if (f != t.f_hat || std::abs(a - t.a_hat) > 1e-9 * std::abs(a)) changed = true;
          t.f_hat = f;
          t.a_hat = a;
          r = std::move(cand);
        }
      }
      if (!changed) break;
    }

    double e = energy(r) / M;
    double b_i = bic(i, e);
    double b_prev = res.bic.back();
    res.bic.push_back(b_i);
    res.residual_energy.push_back(e);
    bool stop = opt.strict_increase ? (b_i > b_prev) : (b_i >= b_prev);
    if (stop) break;
    comps = std::move(trial);
  }
  for (auto& c : comps) c.gamma_db = 20.0 * std::log10(std::abs(c.a_hat) + 1e-300);
  std::stable_sort(comps.begin(), comps.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.a_hat) > std::abs(b.a_hat); });
  res.components = std::move(comps);
  return res;
}

struct ShiftEstimate {
  int shift = -1;
  double eps = 0;     // L (w/8 - f) wrapped to (-L/2, L/2]
  long eps_int = 0;   // rounded
};

// Nearest assigned shift on the unit circle; ties go to the lower shift.
inline ShiftEstimate classify_shift(double f_hat, const std::set<int>& shifts, int L) {
  if (shifts.empty()) throw ConfigError("no assigned shifts");
  ShiftEstimate out;
  double best = 2.0;
  for (int w : shifts) {
    if (w < 0 || w > 7) throw ConfigError("shift outside 0..7");
    double d = wrap01(f_hat - w / 8.0);
    d = std::min(d, 1.0 - d);
    if (d < best - 1e-12) {
      best = d;
      out.shift = w;
    }
  }
  double x = wrap01(out.shift / 8.0 - f_hat);  // [0,1)
  if (x > 0.5) x -= 1.0;                       // (-0.5, 0.5]
  out.eps = L * x;
  out.eps_int = std::lround(out.eps);
  return out;
}

struct BandUe {
  int ue_id = 0;
  int shift = 0;
};

struct CleanedMeasurement {
  std::map<int, std::optional<double>> gamma_max_db;  // ue_id -> strongest gamma
  std::map<int, bool> detected;
  std::optional<double> eps_ref;  // residual of the strongest component
  std::optional<int> ref_ue;
};

// Labels each component with its shift estimate.
inline void classify_all(std::vector<DetectionComponent>& comps, const std::vector<BandUe>& ues,
                         int L) {
  std::set<int> shifts;
  for (auto& u : ues) shifts.insert(u.shift);
  if (shifts.empty()) return;
  for (auto& c : comps) {
    auto s = classify_shift(c.f_hat, shifts, L);
    c.shift_hat = s.shift;
    c.eps_hat = s.eps;
  }
}

inline CleanedMeasurement clean(const std::vector<DetectionComponent>& comps,
                                const std::vector<BandUe>& ues) {
  CleanedMeasurement out;
  std::map<int, int> by_shift;
  for (auto& u : ues) {
    by_shift[u.shift] = u.ue_id;
    out.gamma_max_db[u.ue_id] = std::nullopt;
    out.detected[u.ue_id] = false;
  }
  const DetectionComponent* strongest = nullptr;
  for (auto& c : comps) {
    auto it = by_shift.find(c.shift_hat);
    if (it == by_shift.end()) continue;
    auto& g = out.gamma_max_db[it->second];
    if (!g || c.gamma_db > *g) g = c.gamma_db;
    out.detected[it->second] = true;
    if (!strongest || c.gamma_db > strongest->gamma_db) strongest = &c;
  }
  if (strongest) {
    out.eps_ref = strongest->eps_hat;
    out.ref_ue = by_shift[strongest->shift_hat];
  }
  return out;
}

// The components cleaning keeps: the strongest per classified shift, in
// descending strength.
inline std::vector<DetectionComponent> retained(const std::vector<DetectionComponent>& comps) {
  std::vector<DetectionComponent> out;
  std::set<int> seen;
  std::vector<const DetectionComponent*> order;
  for (const auto& c : comps) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->gamma_db > b->gamma_db; });
  for (auto* c : order)
    if (seen.insert(c->shift_hat).second) out.push_back(*c);
  return out;
}

enum class Verdict { srs_confirmed, false_positive };

inline const char* to_string(Verdict v) {
  return v == Verdict::srs_confirmed ? "srs_confirmed" : "false_positive";
}

// BIC keeping the zero-component model means the trigger was not an SRS; the
// caller re-arms acquisition on fresh samples.
inline Verdict false_positive_check(const MpResult& mp) {
  return mp.components.empty() ? Verdict::false_positive : Verdict::srs_confirmed;
}

struct Identification {
  MpResult mp;
  CleanedMeasurement cleaned;
  Verdict verdict = Verdict::false_positive;
};

// despread -> matching pursuit -> shift labels -> cleaning, for one band.
inline Identification identify(const cplx* y, std::size_t len, long n_start,
                               const waveform::SrsConfig& cfg, const std::vector<BandUe>& ues,
                               const MpOptions& opt = {}, int band_id = 0) {
  Identification id;
  auto sp = despread(y, len, n_start, cfg, band_id);
  id.mp = matching_pursuit(sp, cfg.half_len(), opt);
  classify_all(id.mp.components, ues, cfg.half_len());
  id.cleaned = clean(id.mp.components, ues);
  id.verdict = false_positive_check(id.mp);
  return id;
}

}  // namespace uavsense::ident
