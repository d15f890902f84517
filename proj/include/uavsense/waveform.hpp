#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "uavsense/core/fft.hpp"
#include "uavsense/core/types.hpp"

namespace uavsense::waveform {

struct SrsConfig {
  int numerology_mu = 1;
  int n_fft = 128;
  int comb_ktc = 2;
  int m_srs_rb = 4;
  int k0 = 0;
  int seq_id_q = 1;
  int shift_index_w = 0;
  int period_slots = 80;  // 40 ms at mu=1
  int cp_len = 9;
  // Use a cyclically extended ZC sequence even below 36 (experimentation only).
  bool zc_for_short = false;

  int half_len() const { return n_fft / comb_ktc; }
  int m_srs() const { return 12 * m_srs_rb / comb_ktc; }
  double subcarrier_spacing_hz() const { return 15e3 * std::ldexp(1.0, numerology_mu); }
  double sample_rate_hz() const { return n_fft * subcarrier_spacing_hz(); }
  double slot_s() const { return 1e-3 / std::ldexp(1.0, numerology_mu); }
  long period_samples() const {
    return std::lround(period_slots * slot_s() * sample_rate_hz());
  }
  int symbol_len() const { return n_fft + cp_len; }

  void validate() const {
    if (comb_ktc != 2) throw ConfigError("comb_ktc must be 2");
    if (n_fft <= 0 || n_fft % 2) throw ConfigError("n_fft must be positive and even");
    if (numerology_mu < 0 || numerology_mu > 6) throw ConfigError("numerology out of range");
    if (m_srs_rb < 4) throw ConfigError("m_srs_rb must be >= 4");
    if ((12 * m_srs_rb) % comb_ktc) throw ConfigError("sequence length is not an integer");
    if (k0 < 0 || k0 % comb_ktc)
      throw ConfigError("k0 must be a non-negative multiple of comb_ktc");
    if (k0 + (m_srs() - 1) * comb_ktc >= n_fft)
      throw ConfigError("allocation overflow: k0 + (M-1)*K_TC >= N");
    if (shift_index_w < 0 || shift_index_w > 7) throw ConfigError("shift_index_w must be in 0..7");
    if (cp_len < 0 || cp_len > n_fft) throw ConfigError("cp_len out of range");
    if (period_slots < 1) throw ConfigError("period_slots must be >= 1");
    if (period_samples() < symbol_len()) throw ConfigError("period shorter than one symbol");
  }
};

enum class SequenceKind { zadoff_chu_extended, flat_spectrum_table };

struct BaseSequence {
  cvec values;
  SequenceKind kind = SequenceKind::zadoff_chu_extended;
};

struct SrsSymbol {
  cvec samples;
  SrsConfig config;
};

// ---- short sequence table -------------------------------------------------

// rows[length][group] = phase indices phi, value = exp(j*pi*phi/4)
struct SequenceTable {
  std::map<int, std::vector<std::vector<int>>> rows;
  int version = 0;

  static SequenceTable parse(std::istream& in, const std::string& what = "table") {
    SequenceTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::istringstream h(line.substr(1));
        std::string key;
        h >> key;
        if (key == "version") h >> t.version;
        continue;
      }
      std::istringstream ls(line);
      int len = 0, group = 0;
      if (!(ls >> len >> group) || len <= 0 || group < 0)
        throw FormatError(what + ":" + std::to_string(lineno) + ": bad row header");
      std::vector<int> phi;
      int v;
      while (ls >> v) phi.push_back(v);
      if (static_cast<int>(phi.size()) != len)
        throw FormatError(what + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(len) + " phase indices");
      auto& grp = t.rows[len];
      if (static_cast<int>(grp.size()) != group)
        throw FormatError(what + ":" + std::to_string(lineno) + ": groups must be consecutive");
      grp.push_back(std::move(phi));
    }
    return t;
  }

  static SequenceTable load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open sequence table " + path);
    return parse(f, path);
  }

  // The table compiled in from data/short_sequences_v1.txt.
  static const SequenceTable& builtin() {
    static const SequenceTable t = [] {
      std::istringstream in(
#include "uavsense/short_sequence_table.inc"
      );
      return parse(in, "builtin");
    }();
    return t;
  }
};

// ---- operations -----------------------------------------------------------

inline bool is_prime(int n) {
  if (n < 2) return false;
  for (int d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

inline int largest_prime_below(int m) {
  for (int p = m - 1; p >= 2; --p)
    if (is_prime(p)) return p;
  throw ConfigError("no prime below " + std::to_string(m));
}

inline BaseSequence zc_extended(int q, int m_srs) {
  const int nzc = largest_prime_below(m_srs);
  if (((q % nzc) + nzc) % nzc == 0)
    throw ConfigError("sequence id q must satisfy q mod N_ZC != 0");
  BaseSequence b;
  b.kind = SequenceKind::zadoff_chu_extended;
  b.values.resize(m_srs);
  for (int k = 0; k < m_srs; ++k) {
    // k(k+1) reduced mod 2*N_ZC keeps the phase argument small
    long kk = k % nzc;
    long e = (static_cast<long>(q % nzc) * kk % (2L * nzc)) * (kk + 1) % (2L * nzc);
    b.values[k] = std::polar(1.0, -pi * static_cast<double>(e) / nzc);
  }
  return b;
}

inline BaseSequence base_sequence(int q, int m_srs, bool zc_for_short = false,
                                  const SequenceTable& table = SequenceTable::builtin()) {
  if (m_srs < 6) throw ConfigError("sequence length must be >= 6");
  if (m_srs >= 36 || zc_for_short) return zc_extended(q, m_srs);
  auto it = table.rows.find(m_srs);
  if (it == table.rows.end() || it->second.empty())
    throw ConfigError("unsupported sequence length " + std::to_string(m_srs) +
                      " (no table entry; enable zc_for_short to override)");
  const auto& groups = it->second;
  const int g = ((q % static_cast<int>(groups.size())) + static_cast<int>(groups.size())) %
                static_cast<int>(groups.size());
  BaseSequence b;
  b.kind = SequenceKind::flat_spectrum_table;
  for (int phi : groups[g]) b.values.push_back(std::polar(1.0, pi * phi / 4.0));
  return b;
}

inline cvec apply_cyclic_shift(const cvec& base, int w) {
  if (w < 0 || w > 7) throw ConfigError("shift index must be in 0..7");
  cvec out(base.size());
  for (std::size_t k = 0; k < base.size(); ++k) {
    // (w*k) mod 8 keeps w=0 and w=4 exact
    out[k] = base[k] * std::polar(1.0, 2.0 * pi * static_cast<double>((w * k) % 8) / 8.0);
  }
  return out;
}

inline BaseSequence base_sequence(const SrsConfig& cfg) {
  return base_sequence(cfg.seq_id_q, cfg.m_srs(), cfg.zc_for_short);
}

// First half (L samples) of the comb-2 symbol body, unit symbol energy.
inline cvec half_symbol(const SrsConfig& cfg) {
  cfg.validate();
  const int L = cfg.half_len();
  const int M = cfg.m_srs();
  cvec q = apply_cyclic_shift(base_sequence(cfg).values, cfg.shift_index_w);
  // Even grid bins k0 + 2m land on bin k0/2 + m of the half-length transform.
  cvec z(L);
  for (int m = 0; m < M; ++m) z[cfg.k0 / cfg.comb_ktc + m] = q[m];
  cvec h = fft::inverse(z);
  const double e = 2.0 * energy(h);
  for (auto& v : h) v /= std::sqrt(e);
  return h;
}

inline SrsSymbol synthesize_symbol(const SrsConfig& cfg) {
  cvec h = half_symbol(cfg);
  const int N = cfg.n_fft, L = cfg.half_len(), cp = cfg.cp_len;
  SrsSymbol s;
  s.config = cfg;
  s.samples.resize(N + cp);
  for (int n = 0; n < N; ++n) s.samples[cp + n] = h[n % L];
  for (int n = 0; n < cp; ++n) s.samples[n] = s.samples[N + n];
  return s;
}

inline IqCapture srs_frame(const SrsConfig& cfg, int n_periods) {
  if (n_periods < 1) throw ConfigError("n_periods must be >= 1");
  SrsSymbol sym = synthesize_symbol(cfg);
  const long T = cfg.period_samples();
  IqCapture cap;
  cap.sample_rate_hz = cfg.sample_rate_hz();
  cap.samples.assign(static_cast<std::size_t>(T * n_periods), cplx{});
  for (int p = 0; p < n_periods; ++p)
    std::copy(sym.samples.begin(), sym.samples.end(), cap.samples.begin() + p * T);
  return cap;
}

inline IqCapture srs_frame(const SrsConfig& cfg, int n_periods, double fs) {
  if (std::abs(fs - cfg.sample_rate_hz()) > 1e-6 * fs)
    throw ConfigError("sample rate does not match the SRS numerology");
  return srs_frame(cfg, n_periods);
}

}  // namespace uavsense::waveform
