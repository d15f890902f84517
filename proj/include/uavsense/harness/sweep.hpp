#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <mutex>
#include <numeric>
#include <thread>

#include "uavsense/harness/config.hpp"
#include "uavsense/harness/process.hpp"

namespace uavsense::harness {

struct Proportion {
  long k = 0, n = 0;
  double p = 0, lo = 0, hi = 1;
};

inline Proportion wilson(long k, long n, double z = 1.959963984540054) {
  Proportion r;
  r.k = k;
  r.n = n;
  if (n <= 0) return r;
  const double nn = static_cast<double>(n), ph = static_cast<double>(k) / nn;
  const double den = 1 + z * z / nn;
  const double mid = (ph + z * z / (2 * nn)) / den;
  const double half = z * std::sqrt(ph * (1 - ph) / nn + z * z / (4 * nn * nn)) / den;
  r.p = ph;
  r.lo = std::max(0.0, mid - half);
  r.hi = std::min(1.0, mid + half);
  return r;
}

// Run f(i) for i in [0, n) on `threads` workers (0 = hardware).
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  unsigned w = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  w = static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  if (w <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < w; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
}

// ---- misidentification grid -------------------------------------------------

struct BandwidthSetting {
  std::string name;
  waveform::SrsConfig srs;
};

inline BandwidthSetting bw_1m4() { return {"1.4MHz", {}}; }

// 36 RB comb-2 at 30 kHz, N = 512.
inline BandwidthSetting bw_13m() {
  BandwidthSetting b{"13MHz", {}};
  b.srs.n_fft = 512;
  b.srs.m_srs_rb = 36;
  b.srs.cp_len = 36;
  return b;
}

inline rvec linspace(double a, double b, int n) {
  rvec v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

struct MisidSpec {
  std::vector<int> ub = {2, 4, 8};
  rvec delays_s = linspace(0, 2.1e-6, 8);  // spread between earliest and latest UE
  rvec powers_db = linspace(0, 21, 8);     // gap between strongest and weakest UE
  std::vector<BandwidthSetting> bandwidths = {bw_1m4()};
  int trials = 500;
  double snr_db = 20;       // per sample, strongest UE
  double rician_k_db = 10;  // LoS over diffuse power
  int n_diffuse = 2;
  double max_excess_s = 200e-9;
  mission::Processing proc;
  std::uint64_t seed = 1;
  int threads = 0;
  std::uint64_t order_seed = 0;  // nonzero: shuffle the job order

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (ub.empty() || delays_s.empty() || powers_db.empty() || bandwidths.empty())
      throw ConfigError("misid grid: empty axis");
    for (int u : ub)
      if (u < 1 || u > 8 || 8 % u != 0) throw ConfigError("misid grid: U_b must be 1, 2, 4 or 8");
    for (double d : delays_s)
      if (d < 0) throw ConfigError("misid grid: negative delay spread");
    for (double p : powers_db)
      if (p < 0) throw ConfigError("misid grid: negative power spread");
    if (n_diffuse < 0 || max_excess_s < 0) throw ConfigError("misid grid: invalid channel");
    for (const auto& b : bandwidths) {
      b.srs.validate();
      double span = (delays_s.empty() ? 0 : *std::max_element(delays_s.begin(), delays_s.end())) +
                    max_excess_s;
      if (span * b.srs.sample_rate_hz() > b.srs.cp_len + 1e-9)
        throw ConfigError("misid grid: delay spread exceeds the CP at " + b.name);
    }
  }
};

struct TrialOutcome {
  bool misid = false;
  bool any_missed = false;
  int missed_ues = 0;
  bool no_sync = false;
};

struct MisidCell {
  std::string bandwidth;
  int ub = 0;
  double delay_s = 0, power_db = 0;
  long trials = 0, misid = 0, missed = 0, missed_ues = 0, no_sync = 0;
  Proportion p_misid() const { return wilson(misid, trials); }
  Proportion p_missed() const { return wilson(missed, trials); }
};

struct MisidGrid {
  std::vector<MisidCell> cells;
  std::string ci_method = "wilson95";
  const MisidCell& at(const std::string& bw, int ub, std::size_t di, std::size_t pi, const MisidSpec& s) const {
    for (const auto& c : cells)
      if (c.bandwidth == bw && c.ub == ub && c.delay_s == s.delays_s[di] && c.power_db == s.powers_db[pi])
        return c;
    throw ConfigError("misid grid: no such cell");
  }
};

// One trial: U_b UEs on evenly spaced shifts, one at delay 0 and one at D, the
// rest uniform in between; powers 0 and -P with the rest uniform. Each UE sees
// a Rician tapped delay line. Roles are shuffled over the shifts.
inline TrialOutcome misid_trial(const MisidSpec& s, const waveform::SrsConfig& srs, int ub, double D,
                                double P, std::uint64_t seed) {
  auto g = rng::engine(seed);
  const double fs = srs.sample_rate_hz();
  const int L = srs.half_len();
  const long sym = srs.symbol_len();
  const long pre = sym;
  const std::size_t len = static_cast<std::size_t>(pre + 2 * sym + srs.cp_len + 40);

  std::vector<double> tau(static_cast<std::size_t>(ub)), pw(static_cast<std::size_t>(ub));
  for (int i = 0; i < ub; ++i) {
    tau[i] = i == 0 ? 0.0 : i == 1 ? D : rng::uniform(g, 0, D);
    pw[i] = i == 0 ? 0.0 : i == 1 ? -P : rng::uniform(g, -P, 0);
  }
  std::shuffle(tau.begin(), tau.end(), g);
  std::shuffle(pw.begin(), pw.end(), g);

  const double K = from_db10(s.rician_k_db);
  const double full_scale = std::sqrt(static_cast<double>(srs.n_fft));
  IqCapture rx;
  rx.sample_rate_hz = fs;
  rx.samples.assign(len, cplx{});
  std::vector<ident::BandUe> ues;
  std::vector<TrueArrival> truth;
  for (int i = 0; i < ub; ++i) {
    const int w = i * (8 / ub);
    auto cfg = srs;
    cfg.shift_index_w = w;
    IqCapture tx;
    tx.sample_rate_hz = fs;
    tx.t0_s = static_cast<double>(pre) / fs;
    tx.samples = waveform::synthesize_symbol(cfg).samples;
    for (auto& v : tx.samples) v *= full_scale;
    std::vector<channel::ChannelPath> paths;
    paths.push_back({std::polar(std::sqrt(K / (K + 1)), rng::uniform(g, 0, 2 * pi)), tau[i], 0});
    for (int k = 0; k < s.n_diffuse; ++k) {
      double ex = rng::uniform(g, 0, s.max_excess_s);
      paths.push_back({rng::cgauss(g, 1.0 / (K + 1) / s.n_diffuse), tau[i] + ex, 0});
    }
    channel::UeProfile ue;
    ue.ue_id = i + 1;
    ue.tx_power_dbm = pw[i];
    auto y = channel::propagate_into(tx, paths, ue, 0.0, len);
    for (std::size_t n = 0; n < len; ++n) rx.samples[n] += y.samples[n];
    ues.push_back({i + 1, w});
    truth.push_back({i + 1, w, static_cast<double>(pre + srs.cp_len) + tau[i] * fs});
  }
  channel::add_noise(rx, from_db10(-s.snr_db), g);

  TrialOutcome out;
  auto trace = sync::repetition_metric(rx, L, srs.cp_len);
  auto det = sync::detect(trace, s.proc.m_th, s.proc.delta);
  if (!det || *det + L > static_cast<long>(len)) {
    out.no_sync = out.any_missed = true;
    out.missed_ues = ub;
    return out;
  }
  auto id = ident::identify(rx.samples.data(), len, *det, srs, ues, s.proc.mp);
  auto sc = score_labels(id, *det, truth, L);
  out.misid = !sc.wrong.empty();
  out.missed_ues = static_cast<int>(sc.missed.size());
  out.any_missed = out.missed_ues > 0;
  return out;
}

inline MisidGrid run_misid_grid(const MisidSpec& s) {
  s.validate();
  MisidGrid grid;
  struct Job {
    std::size_t cell;
    int trial;
  };
  std::vector<Job> jobs;
  std::vector<std::array<std::size_t, 4>> index;  // bw, ub, delay, power
  for (std::size_t b = 0; b < s.bandwidths.size(); ++b)
    for (std::size_t u = 0; u < s.ub.size(); ++u)
      for (std::size_t d = 0; d < s.delays_s.size(); ++d)
        for (std::size_t p = 0; p < s.powers_db.size(); ++p) {
          MisidCell c;
          c.bandwidth = s.bandwidths[b].name;
          c.ub = s.ub[u];
          c.delay_s = s.delays_s[d];
          c.power_db = s.powers_db[p];
          c.trials = s.trials;
          for (int t = 0; t < s.trials; ++t) jobs.push_back({grid.cells.size(), t});
          grid.cells.push_back(c);
          index.push_back({b, u, d, p});
        }
  if (s.order_seed) {
    auto g = rng::engine(s.order_seed);
    std::shuffle(jobs.begin(), jobs.end(), g);
  }
  std::vector<TrialOutcome> outcome(jobs.size());
  std::vector<std::size_t> slot(jobs.size());  // job -> position in cell-major order
  for (std::size_t j = 0; j < jobs.size(); ++j) slot[j] = jobs[j].cell * s.trials + jobs[j].trial;
  parallel_for(jobs.size(), s.threads, [&](std::size_t j) {
    const auto [b, u, d, p] = index[jobs[j].cell];
    const auto seed = rng::derive(s.seed, {b, static_cast<std::uint64_t>(s.ub[u]), d, p,
                                           static_cast<std::uint64_t>(jobs[j].trial)});
    outcome[slot[j]] = misid_trial(s, s.bandwidths[b].srs, s.ub[u], s.delays_s[d], s.powers_db[p], seed);
  });
  for (std::size_t c = 0; c < grid.cells.size(); ++c)
    for (int t = 0; t < s.trials; ++t) {
      const auto& o = outcome[c * s.trials + t];
      auto& cell = grid.cells[c];
      cell.misid += o.misid;
      cell.missed += o.any_missed;
      cell.missed_ues += o.missed_ues;
      cell.no_sync += o.no_sync;
    }
  return grid;
}

// Pooled over the power axis for one (bandwidth, U_b, delay) row.
inline Proportion pooled_over_power(const MisidGrid& g, const std::string& bw, int ub, double delay_s) {
  long k = 0, n = 0;
  for (const auto& c : g.cells)
    if (c.bandwidth == bw && c.ub == ub && c.delay_s == delay_s) {
      k += c.misid;
      n += c.trials;
    }
  return wilson(k, n);
}

// ---- localization CDF -------------------------------------------------------

struct LocCdfSpec {
  ScenarioFile scenario;
  std::uint64_t first_seed = 1;
  int n_seeds = 50;
  int threads = 0;
};

struct LeSample {
  std::uint64_t seed = 0;
  int ue_id = 0;
  bool los = true;
  std::optional<double> le_initial, le_refined;
  double t_initial_s = std::numeric_limits<double>::quiet_NaN();
  double t_refined_s = std::numeric_limits<double>::quiet_NaN();
};

struct SeedSummary {
  std::uint64_t seed = 0;
  std::optional<double> ale_initial, ale_refined;
  double initial_phase_s = 0, total_time_s = 0;
};

struct LocCdf {
  std::string scenario;
  std::vector<LeSample> samples;
  std::vector<SeedSummary> seeds;
  std::optional<double> ale_initial, ale_refined;  // over all finite samples
};

inline LocCdf run_loc_cdf(const LocCdfSpec& s) {
  if (s.n_seeds < 1) throw ConfigError("loc cdf: n_seeds must be >= 1");
  std::vector<mission::MissionReport> reps(static_cast<std::size_t>(s.n_seeds));
  parallel_for(reps.size(), s.threads, [&](std::size_t i) {
    reps[i] = mission::run_mission(s.scenario.scenario, s.scenario.plan, s.first_seed + i, s.scenario.processing);
  });
  LocCdf out;
  out.scenario = s.scenario.scenario.name;
  rvec li, lr;
  for (const auto& r : reps) {
    out.seeds.push_back({r.seed, r.ale_initial, r.ale_refined, r.initial_phase_s, r.total_time_s});
    for (const auto& u : r.ues) {
      out.samples.push_back({r.seed, u.ue_id, u.los, u.le_initial, u.le_refined, u.est.t_initial_s,
                             u.est.t_refined_s});
      if (u.le_initial) li.push_back(*u.le_initial);
      if (u.le_refined) lr.push_back(*u.le_refined);
    }
  }
  if (!li.empty()) out.ale_initial = locate::average_error(li);
  if (!lr.empty()) out.ale_refined = locate::average_error(lr);
  return out;
}

struct CdfPoint {
  double x = 0, f = 0;
};

inline std::vector<CdfPoint> empirical_cdf(rvec x) {
  std::sort(x.begin(), x.end());
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back({x[i], static_cast<double>(i + 1) / x.size()});
  return out;
}

}  // namespace uavsense::harness
