#pragma once

#include "uavsense/mission.hpp"

// Offline processing of a recorded capture for one band: acquire, then track
// one reception per SRS period.
namespace uavsense::harness {

struct Reception {
  long iteration = 0;  // period index in the capture
  long window = 0;     // window start, samples from the capture start
  bool acquisition = false;
  double snr_db = sync::snr_floor_db;
  ident::Identification id;
};

struct ProcessResult {
  std::vector<Reception> receptions;
  std::vector<mission::DetectionRow> rows;
  int acquisitions = 0, false_positives = 0;
};

// Rows: one per retained component (strongest per UE), or one empty row when
// nothing was kept.
inline void append_rows(std::vector<mission::DetectionRow>& rows, const Reception& r, double t,
                        int band, int antenna) {
  mission::DetectionRow base;
  base.t = t;
  base.band = band;
  base.antenna = antenna;
  base.iteration = r.iteration;
  base.verdict = ident::to_string(r.id.verdict);
  if (r.id.mp.components.empty()) {
    rows.push_back(base);
    return;
  }
  for (const auto& c : ident::retained(r.id.mp.components)) {
    auto x = base;
    x.f_hat = c.f_hat;
    x.gamma_db = c.gamma_db;
    x.shift_hat = c.shift_hat;
    rows.push_back(x);
  }
}

inline ProcessResult process_capture(const IqCapture& cap, const waveform::SrsConfig& srs,
                                     const std::vector<ident::BandUe>& ues,
                                     const mission::Processing& proc = {}, int band = 0) {
  srs.validate();
  if (std::abs(cap.sample_rate_hz - srs.sample_rate_hz()) > 1e-6 * srs.sample_rate_hz())
    throw ConfigError("capture sample rate does not match the SRS numerology");
  const cvec& y = cap.samples;
  const long len = static_cast<long>(y.size());
  const long T = srs.period_samples();
  const int L = srs.half_len();
  ProcessResult res;

  sync::SyncState st;
  st.beta = proc.beta;
  st.period_samples = T;
  bool synced = false;
  double eps_ref0 = 0;
  int misses = 0;
  long k = 0;
  long a = 0;  // acquisition search start

  auto emit = [&](Reception r) {
    r.iteration = r.window / T;
    append_rows(res.rows, r, cap.t0_s + static_cast<double>(r.window) / cap.sample_rate_hz, band,
                cap.antenna_id);
    res.receptions.push_back(std::move(r));
  };

  while (true) {
    if (!synced) {
      if (a + 2L * L + srs.cp_len > len) break;
      ++res.acquisitions;
      const long n = std::min(2 * T, len - a);
      auto trace = sync::repetition_metric(y.data() + a, static_cast<std::size_t>(n), L, srs.cp_len);
      auto det = sync::detect(trace, proc.m_th, proc.delta);
      if (!det || a + *det + L > len) {
        a += T;
        continue;
      }
      Reception r;
      r.acquisition = true;
      r.window = a + *det;
      r.snr_db = sync::estimate_snr(trace.m_f[*det]).db;
      r.id = ident::identify(y.data(), y.size(), r.window, srs, ues, proc.mp, band);
      if (r.id.verdict == ident::Verdict::false_positive || !r.id.cleaned.eps_ref) {
        ++res.false_positives;
        emit(std::move(r));
        a = a + *det + T;  // fresh samples
        continue;
      }
      synced = true;
      misses = 0;
      k = 0;
      st.n_sync = r.window;
      st.eps_filtered = 0;
      st.q = 0;
      st.est_snr_db = r.snr_db;
      eps_ref0 = *r.id.cleaned.eps_ref;
      emit(std::move(r));
      continue;
    }
    ++k;
    const double nominal = static_cast<double>(st.n_sync) + static_cast<double>(k * T);
    const long w = std::llround(st.expected(static_cast<int>(k)));
    if (w < 0 || w + L > len) break;
    Reception r;
    r.window = w;
    r.snr_db = st.est_snr_db;
    r.id = ident::identify(y.data(), y.size(), w, srs, ues, proc.mp, band);
    if (r.id.verdict == ident::Verdict::false_positive || !r.id.cleaned.eps_ref) {
      ++res.false_positives;
      emit(std::move(r));
      if (++misses >= proc.max_misses) {
        synced = false;
        a = w + L;
      }
      continue;
    }
    misses = 0;
    const double eps_abs = (static_cast<double>(w) - nominal) + (*r.id.cleaned.eps_ref - eps_ref0);
    st = sync::track(st, static_cast<int>(k), eps_abs);
    emit(std::move(r));
  }
  return res;
}

// Ground truth for scoring: where each UE's symbol body actually starts.
struct TrueArrival {
  int ue_id = 0;
  int shift = 0;
  double body_start = 0;  // capture samples
};

struct LabelScore {
  int components = 0;
  int misidentified = 0;  // component labelled with another UE than its origin
  std::vector<int> missed;  // UEs with no component labelled for them
  std::vector<int> wrong;   // UEs whose strongest labelled component came from another UE
  bool all_correct() const { return misidentified == 0 && missed.empty(); }
  bool labels_recovered() const { return missed.empty() && wrong.empty(); }
};

// Origin of a component: the UE whose expected tone w/8 - eps/L is nearest on
// the unit circle. Its label is the UE owning the classified shift.
inline LabelScore score_labels(const ident::Identification& id, long window,
                               const std::vector<TrueArrival>& truth, int L) {
  LabelScore s;
  std::map<int, int> by_shift;
  for (const auto& t : truth) by_shift[t.shift] = t.ue_id;
  std::map<int, std::pair<double, int>> strongest;  // label -> (gamma, origin)
  for (const auto& c : id.mp.components) {
    ++s.components;
    int origin = -1;
    double best = 2;
    for (const auto& t : truth) {
      double f = t.shift / 8.0 - (t.body_start - static_cast<double>(window)) / L;
      double d = ident::wrap01(c.f_hat - f);
      d = std::min(d, 1.0 - d);
      if (d < best) {
        best = d;
        origin = t.ue_id;
      }
    }
    auto it = by_shift.find(c.shift_hat);
    if (it == by_shift.end() || it->second != origin) ++s.misidentified;
    if (it == by_shift.end()) continue;
    auto [pos, fresh] = strongest.try_emplace(it->second, c.gamma_db, origin);
    if (!fresh && c.gamma_db > pos->second.first) pos->second = {c.gamma_db, origin};
  }
  for (const auto& t : truth) {
    auto it = strongest.find(t.ue_id);
    if (it == strongest.end())
      s.missed.push_back(t.ue_id);
    else if (it->second.second != t.ue_id)
      s.wrong.push_back(t.ue_id);
  }
  return s;
}

}  // namespace uavsense::harness
