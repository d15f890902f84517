#pragma once

#include "uavsense/channel.hpp"
#include "uavsense/core/rng.hpp"
#include "uavsense/harness/process.hpp"
#include "uavsense/waveform.hpp"

// Laboratory-style composite captures: a few UE symbols superimposed with
// per-UE power, sample offset and CFO, optionally copied onto a second band.
namespace uavsense::harness {

struct CompositeUe {
  int ue_id = 1;
  int shift = 0;
  double power_dbfs = 0;      // mean power over the symbol, 0 dBfs = unit power
  double offset_samples = 0;  // arrival offset, positive = late
  double cfo_hz = 0;
};

struct CompositeSpec {
  waveform::SrsConfig srs;  // k0 of the first band
  std::vector<CompositeUe> ues;
  bool duplicate_band = false;
  int duplicate_k0 = 80;  // subcarriers -48..-1, just below the first band at 0..47
  int n_periods = 2;
  long start_sample = 1000;            // symbol start (CP) inside each period
  std::optional<double> snr_db = 20;   // per sample, relative to the strongest UE; nullopt = clean
  double center_freq_hz = 2.4e9;
  std::uint64_t seed = 1;

  static CompositeSpec lab() {
    CompositeSpec s;
    s.ues = {{1, 0, -5, 0, 150}, {2, 4, -8, 1.5, -90}, {3, 2, -15, -1.5, 40}};
    s.duplicate_band = true;
    return s;
  }
};

struct CompositeBand {
  int band = 0;
  waveform::SrsConfig srs;
  std::vector<ident::BandUe> ues;
};

// Band 0 uses srs.k0 with the listed ids; band 1 (duplicate) uses duplicate_k0
// and ids shifted by the number of UEs.
inline std::vector<CompositeBand> composite_bands(const CompositeSpec& s) {
  std::vector<CompositeBand> out(s.duplicate_band ? 2 : 1);
  const int n = static_cast<int>(s.ues.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].band = static_cast<int>(b);
    out[b].srs = s.srs;
    if (b == 1) out[b].srs.k0 = s.duplicate_k0;
    for (const auto& u : s.ues) out[b].ues.push_back({u.ue_id + static_cast<int>(b) * n, u.shift});
  }
  return out;
}

inline void validate(const CompositeSpec& s) {
  s.srs.validate();
  if (s.ues.empty()) throw ConfigError("composite: no UEs");
  if (s.n_periods < 1) throw ConfigError("composite: n_periods must be >= 1");
  const long T = s.srs.period_samples();
  if (s.start_sample < 0 || s.start_sample + s.srs.symbol_len() + 64 > T)
    throw ConfigError("composite: start_sample outside the period");
  std::set<int> ids, shifts;
  for (const auto& u : s.ues) {
    if (u.shift < 0 || u.shift > 7) throw ConfigError("composite: shift outside 0..7");
    if (!ids.insert(u.ue_id).second) throw ConfigError("composite: duplicate UE id");
    if (!shifts.insert(u.shift).second) throw ConfigError("composite: duplicate shift");
    if (std::abs(u.offset_samples) > s.srs.cp_len) throw ConfigError("composite: offset exceeds the CP");
  }
  if (s.duplicate_band) {
    const int N = s.srs.n_fft, width = s.srs.comb_ktc * s.srs.m_srs();
    const int d0 = ((s.duplicate_k0 - s.srs.k0) % N + N) % N;  // circular distance
    if (d0 < width || N - d0 < width) throw ConfigError("composite: band collision");
    auto d = s.srs;
    d.k0 = s.duplicate_k0;
    d.validate();
    for (int id : ids)
      if (ids.count(id + static_cast<int>(s.ues.size())))
        throw ConfigError("composite: duplicate-band ids collide");
  }
}

inline IqCapture build_composite_capture(const CompositeSpec& s) {
  validate(s);
  const double fs = s.srs.sample_rate_hz();
  const long T = s.srs.period_samples();
  const std::size_t len = static_cast<std::size_t>(T * s.n_periods);
  const double full_scale = std::sqrt(static_cast<double>(s.srs.n_fft));

  IqCapture out;
  out.sample_rate_hz = fs;
  out.center_freq_hz = s.center_freq_hz;
  out.samples.assign(len, cplx{});
  double strongest = -1e300;
  for (const auto& band : composite_bands(s)) {
    for (std::size_t i = 0; i < s.ues.size(); ++i) {
      const auto& u = s.ues[i];
      auto cfg = band.srs;
      cfg.shift_index_w = u.shift;
      const cvec sym = waveform::synthesize_symbol(cfg).samples;
      IqCapture tx;
      tx.sample_rate_hz = fs;
      tx.samples.assign(len, cplx{});
      for (int p = 0; p < s.n_periods; ++p)
        for (std::size_t n = 0; n < sym.size(); ++n) tx.samples[p * T + s.start_sample + n] = sym[n] * full_scale;
      channel::UeProfile ue;
      ue.ue_id = band.ues[i].ue_id;
      ue.tx_power_dbm = u.power_dbfs;
      ue.cfo_hz = u.cfo_hz;
      channel::ChannelPath path{cplx{1.0, 0.0}, u.offset_samples / fs, 0.0};
      auto y = channel::propagate_into(tx, {path}, ue, 0.0, len);
      for (std::size_t n = 0; n < len; ++n) out.samples[n] += y.samples[n];
      strongest = std::max(strongest, u.power_dbfs);
    }
  }
  if (s.snr_db) {
    auto g = rng::engine(s.seed);
    channel::add_noise(out, from_db10(strongest - *s.snr_db), g);
  }
  return out;
}

// True body starts of band `band` in period p.
inline std::vector<TrueArrival> composite_truth(const CompositeSpec& s, int band, long p) {
  std::vector<TrueArrival> out;
  const auto b = composite_bands(s).at(static_cast<std::size_t>(band));
  const double base = static_cast<double>(p * s.srs.period_samples() + s.start_sample + s.srs.cp_len);
  for (std::size_t i = 0; i < s.ues.size(); ++i)
    out.push_back({b.ues[i].ue_id, s.ues[i].shift, base + s.ues[i].offset_samples});
  return out;
}

}  // namespace uavsense::harness
