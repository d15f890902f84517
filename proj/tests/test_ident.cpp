#include <gtest/gtest.h>

#include "oracle.hpp"
#include "uavsense/core/rng.hpp"
#include "uavsense/ident.hpp"

using namespace uavsense;
using namespace uavsense::ident;

namespace {

struct Tx {
  int w = 0;
  double power_db = 0;  // mean sample power over the symbol
  double eps = 0;       // body start minus window start, integer samples
  double phase = 0;
};

// Window starts at `win`; each UE body starts at win + eps.
cvec render(const std::vector<Tx>& txs, long win = 300, std::size_t len = 1000) {
  cvec y(len);
  for (const auto& t : txs) {
    waveform::SrsConfig c;
    c.shift_index_w = t.w;
    auto s = waveform::synthesize_symbol(c).samples;
    const cplx a = std::polar(std::sqrt(from_db10(t.power_db) * c.n_fft), t.phase);
    const long start = win + std::lround(t.eps) - c.cp_len;
    for (std::size_t n = 0; n < s.size(); ++n) y[start + n] += a * s[n];
  }
  return y;
}

void add_awgn(cvec& y, double power, std::uint64_t seed) {
  auto g = rng::engine(seed);
  for (auto& v : y) v += rng::cgauss(g, power);
}

DespreadSpectrum tones(const std::vector<std::pair<double, cplx>>& t, int M) {
  DespreadSpectrum sp;
  sp.c.assign(M, {});
  for (auto [f, a] : t)
    for (int m = 0; m < M; ++m) sp.c[m] += a * std::polar(1.0, 2 * pi * std::fmod(m * f, 1.0));
  return sp;
}

double circ(double a, double b) {
  double d = wrap01(a - b);
  return std::min(d, 1 - d);
}

const waveform::SrsConfig cfg0{};

}  // namespace

TEST(Despread, ZeroShiftGivesConstant) {
  auto y = render({{0, 0.0, 0, 0.7}});
  auto sp = despread(y.data(), y.size(), 300, cfg0);
  ASSERT_EQ(sp.c.size(), 24u);
  for (auto v : sp.c) EXPECT_LT(std::abs(v - sp.c[0]), 1e-9);
  EXPECT_NEAR(std::abs(sp.c[0]), 1.0, 1e-9);
  EXPECT_NEAR(std::arg(sp.c[0]), 0.7, 1e-9);
}

TEST(Despread, ShiftFourIsHalfCycle) {
  auto y = render({{4, -3.0, 0, 0}});
  auto sp = despread(y.data(), y.size(), 300, cfg0);
  for (int m = 1; m < 24; ++m) EXPECT_LT(std::abs(sp.c[m] + sp.c[m - 1]), 1e-9);
  cvec padded(64);
  std::copy(sp.c.begin(), sp.c.end(), padded.begin());
  auto C = oracle::dft(padded, -1);
  std::size_t kb = 0;
  for (std::size_t k = 0; k < C.size(); ++k)
    if (std::abs(C[k]) > std::abs(C[kb])) kb = k;
  EXPECT_EQ(kb, 32u);
}

TEST(Despread, PositiveOffsetMovesToNegativeFrequency) {
  for (int eps : {2, -5, 7}) {
    auto y = render({{0, 0.0, double(eps), 0}});
    auto sp = despread(y.data(), y.size(), 300, cfg0);
    cvec padded(64);
    std::copy(sp.c.begin(), sp.c.end(), padded.begin());
    auto C = oracle::dft(padded, -1);
    std::size_t kb = 0;
    for (std::size_t k = 0; k < C.size(); ++k)
      if (std::abs(C[k]) > std::abs(C[kb])) kb = k;
    EXPECT_EQ(kb, static_cast<std::size_t>((64 - eps) % 64)) << eps;
  }
}

TEST(Despread, WindowOutOfRange) {
  cvec y(100);
  EXPECT_THROW(despread(y.data(), y.size(), 40, cfg0), ConfigError);
  EXPECT_THROW(despread(y.data(), y.size(), -1, cfg0), ConfigError);
}

TEST(MatchingPursuit, SingleExactBinTone) {
  auto sp = tones({{40.0 / 256, std::polar(1.0, 0.3)}}, 24);
  auto r = matching_pursuit(sp, 64);
  ASSERT_EQ(r.components.size(), 1u);
  EXPECT_LT(std::abs(r.components[0].f_hat - 40.0 / 256), 1e-6);
  EXPECT_NEAR(std::abs(r.components[0].a_hat), 1.0, 1e-6);
  ASSERT_GE(r.bic.size(), 3u);
  EXPECT_LT(r.bic[1], r.bic[0]);
  EXPECT_GE(r.bic[2], r.bic[1]);
}

TEST(MatchingPursuit, ThreeShiftsInPowerOrder) {
  auto y = render({{0, -5, 0, 0.1}, {4, -8, 0, 1.2}, {2, -15, 0, -2.0}});
  auto sp = despread(y.data(), y.size(), 300, cfg0);
  auto r = matching_pursuit(sp, 64);
  ASSERT_EQ(r.components.size(), 3u);
  const double f[3] = {0.0, 0.5, 0.25}, g[3] = {-5, -8, -15};
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT(circ(r.components[i].f_hat, f[i]), 1e-9);
    EXPECT_NEAR(r.components[i].gamma_db, g[i], 1e-6);
    EXPECT_NEAR(r.components[i].gamma_db, 20 * std::log10(std::abs(r.components[i].a_hat)), 1e-9);
  }
}

TEST(MatchingPursuit, WhiteNoiseIsDeclaredNoise) {
  int none = 0;
  const int seeds = 5000;
  for (int s = 0; s < seeds; ++s) {
    DespreadSpectrum sp;
    sp.c.resize(24);
    auto g = rng::engine(77 + s);
    for (auto& v : sp.c) v = rng::cgauss(g, 1.0);
    none += matching_pursuit(sp, 64).components.empty();
  }
  EXPECT_GE(none, 0.9 * seeds);
}

TEST(MatchingPursuit, EmptyAndZero) {
  DespreadSpectrum sp;
  EXPECT_TRUE(matching_pursuit(sp, 64).components.empty());
  sp.c.assign(24, {});
  EXPECT_TRUE(matching_pursuit(sp, 64).components.empty());
  sp.c.assign(24, 1.0);
  MpOptions o;
  o.oversample = 0;
  EXPECT_THROW(matching_pursuit(sp, 64, o), ConfigError);
}

TEST(MatchingPursuit, ResidualNonIncreasing) {
  auto g = rng::engine(5);
  for (int t = 0; t < 200; ++t) {
    DespreadSpectrum sp;
    sp.c.resize(24);
    for (auto& v : sp.c) v = rng::cgauss(g, 1.0);
    for (int k = 0; k < 3; ++k) {
      double f = rng::uniform(g, 0, 1);
      for (int m = 0; m < 24; ++m) sp.c[m] += 3.0 * std::polar(1.0, 2 * pi * m * f);
    }
    MpOptions o;
    o.bic_penalty = 0;  // run to max_components
    o.oversample = 1 + t % 5;
    auto r = matching_pursuit(sp, 64, o);
    for (std::size_t i = 1; i < r.residual_energy.size(); ++i)
      EXPECT_LE(r.residual_energy[i], r.residual_energy[i - 1] * (1 + 1e-12));
  }
}

TEST(MatchingPursuit, ExactRecoveryOfOrthogonalTones) {
  // common offset j0 on the dictionary grid plus distinct shifts w/8
  auto g = rng::engine(2024);
  for (int t = 0; t < 1000; ++t) {
    int K = 1 + t % 4;
    int j0 = static_cast<int>(rng::uniform(g, 0, 32));
    std::vector<int> ws = {0, 1, 2, 3, 4, 5, 6, 7};
    std::shuffle(ws.begin(), ws.end(), g);
    std::vector<std::pair<double, cplx>> tt;
    for (int k = 0; k < K; ++k)
      tt.push_back({(j0 + 32.0 * ws[k]) / 256,
                    std::polar(from_db10(rng::uniform(g, -20, 0) / 2), rng::uniform(g, -pi, pi))});
    auto r = matching_pursuit(tones(tt, 24), 64);
    ASSERT_EQ(r.components.size(), static_cast<std::size_t>(K)) << t;
    for (auto& [f, a] : tt) {
      bool found = false;
      for (auto& c : r.components)
        if (circ(c.f_hat, f) < 1e-12) {
          found = true;
          EXPECT_LT(std::abs(c.a_hat - a), 1e-6);
        }
      EXPECT_TRUE(found);
    }
  }
}

TEST(MatchingPursuit, EqualTonesNeedCyclicRefit) {
  DespreadSpectrum sp = tones({{0.0, 1.0}, {3 / 8.0, cplx(0, 1)}, {5 / 8.0, -1.0}, {6 / 8.0, 1.0}}, 24);
  auto r = matching_pursuit(sp, 64);
  ASSERT_EQ(r.components.size(), 4u);
  for (auto& c : r.components) EXPECT_NEAR(std::abs(c.a_hat), 1.0, 1e-6);
  MpOptions plain;
  plain.cycles = 0;
  auto p = matching_pursuit(sp, 64, plain);
  double worst = 0;
  for (auto& c : p.components) worst = std::max(worst, std::abs(std::abs(c.a_hat) - 1.0));
  EXPECT_TRUE(p.components.size() != 4u || worst > 1e-6);
}

TEST(MatchingPursuit, StrictIncreaseFlag) {
  auto sp = tones({{0.25, 1.0}}, 24);
  MpOptions o;
  o.bic_penalty = 0;  // ties after the floor is hit
  o.strict_increase = false;
  auto a = matching_pursuit(sp, 64, o);
  o.strict_increase = true;
  auto b = matching_pursuit(sp, 64, o);
  EXPECT_EQ(a.components.size(), 1u);
  EXPECT_GT(b.components.size(), a.components.size());
}

TEST(MatchingPursuit, CoarseDictionaryRefines) {
  auto sp = tones({{0.3137, 1.0}}, 24);
  MpOptions o;
  o.oversample = 1;
  auto coarse = matching_pursuit(sp, 64, o);
  o.refine = Refine::never;
  auto raw = matching_pursuit(sp, 64, o);
  ASSERT_FALSE(coarse.components.empty());
  EXPECT_LT(circ(coarse.components[0].f_hat, 0.3137), circ(raw.components[0].f_hat, 0.3137));
}

TEST(Classify, Examples) {
  auto s = classify_shift(0.5, {0, 4}, 64);
  EXPECT_EQ(s.shift, 4);
  EXPECT_EQ(s.eps, 0.0);
  EXPECT_EQ(classify_shift(0.25, {0, 4}, 64).shift, 0);
  EXPECT_EQ(classify_shift(0.75, {0, 4}, 64).shift, 0);
  EXPECT_EQ(classify_shift(0.375, {2, 4}, 64).shift, 2);
  auto e = classify_shift(wrap01(-2.0 / 64), {0, 4}, 64);
  EXPECT_EQ(e.shift, 0);
  EXPECT_NEAR(e.eps, 2.0, 1e-12);
  EXPECT_EQ(e.eps_int, 2);
  EXPECT_THROW(classify_shift(0.1, {}, 64), ConfigError);
  EXPECT_THROW(classify_shift(0.1, {9}, 64), ConfigError);
}

TEST(Classify, UniformFourShiftsSweep) {
  const int L = 64;
  const std::set<int> sh = {0, 2, 4, 6};
  auto g = rng::engine(8);
  for (int t = 0; t < 2000; ++t) {
    int w = 2 * (t % 4);
    double eps = rng::uniform(g, -L / 16.0, L / 16.0);
    if (std::abs(eps) >= L / 16.0) continue;
    auto sp = tones({{wrap01(w / 8.0 - eps / L), 1.0}}, 24);
    MpOptions o;
    o.refine = Refine::always;
    // off-grid tones leave leakage terms behind; the strongest carries the label
    auto r = matching_pursuit(sp, L, o);
    ASSERT_FALSE(r.components.empty());
    EXPECT_EQ(classify_shift(r.components[0].f_hat, sh, L).shift, w) << eps;
  }
}

TEST(Classify, RegionOnDictionaryGrid) {
  // every representable offset strictly inside the region, all U
  const int L = 64, os = 4;
  for (int U : {2, 4, 8}) {
    std::set<int> sh;
    for (int i = 0; i < U; ++i) sh.insert(i * 8 / U);
    const double half = L / (2.0 * U);
    for (int w : sh)
      for (int j = -os * L; j <= os * L; ++j) {
        double eps = double(j) / os;
        if (std::abs(eps) >= half) continue;
        auto r = matching_pursuit(tones({{wrap01(w / 8.0 - eps / L), 1.0}}, 24), L);
        ASSERT_EQ(r.components.size(), 1u);
        auto s = classify_shift(r.components[0].f_hat, sh, L);
        EXPECT_EQ(s.shift, w) << U << " " << eps;
        EXPECT_NEAR(s.eps, eps, 1e-9);
      }
  }
}

TEST(Classify, RegionEndToEnd) {
  // physical offsets are limited to [-L, L_CP] by the window
  const int L = 64;
  for (int U : {2, 4, 8}) {
    std::set<int> sh;
    std::vector<BandUe> ues;
    for (int i = 0; i < U; ++i) {
      sh.insert(i * 8 / U);
      ues.push_back({i, i * 8 / U});
    }
    for (int w : sh)
      for (int eps = -L; eps <= cfg0.cp_len; ++eps) {
        if (std::abs(eps) >= L / (2.0 * U)) continue;
        auto y = render({{w, 0.0, double(eps), 0.4}});
        auto id = identify(y.data(), y.size(), 300, cfg0, ues);
        ASSERT_EQ(id.mp.components.size(), 1u);
        EXPECT_EQ(id.mp.components[0].shift_hat, w);
        EXPECT_NEAR(id.mp.components[0].eps_hat, eps, 1e-9);
      }
  }
}

TEST(Clean, KeepsStrongestAndFlagsMissing) {
  std::vector<BandUe> ues = {{10, 0}, {11, 4}};
  std::vector<DetectionComponent> comps(2);
  comps[0].shift_hat = 0;
  comps[0].gamma_db = -13;
  comps[0].eps_hat = 1;
  comps[1].shift_hat = 0;
  comps[1].gamma_db = -10;
  comps[1].eps_hat = -2;
  auto m = clean(comps, ues);
  EXPECT_EQ(*m.gamma_max_db[10], -10);
  EXPECT_TRUE(m.detected[10]);
  EXPECT_FALSE(m.gamma_max_db[11]);
  EXPECT_FALSE(m.detected[11]);
  EXPECT_EQ(*m.eps_ref, -2);
  EXPECT_EQ(*m.ref_ue, 10);
}

TEST(Clean, ThreeUesTwoPathsEach) {
  std::vector<BandUe> ues = {{1, 0}, {2, 4}, {3, 2}};
  std::vector<Tx> txs;
  const int w[3] = {0, 4, 2};
  const double p[3] = {-5, -8, -15};
  for (int u = 0; u < 3; ++u) {
    txs.push_back({w[u], p[u], 0, 0.3 * u});
    txs.push_back({w[u], p[u] - 6, -1, 1.0 + u});
  }
  auto y = render(txs);
  auto id = identify(y.data(), y.size(), 300, cfg0, ues);
  int retained = 0;
  for (auto& [ue, g] : id.cleaned.gamma_max_db) retained += g.has_value();
  EXPECT_EQ(retained, 3);
  EXPECT_EQ(*id.cleaned.ref_ue, 1);
  EXPECT_EQ(id.verdict, Verdict::srs_confirmed);
}

TEST(FalsePositive, GenuineSrsAtTenDb) {
  std::vector<BandUe> ues = {{1, 3}};
  int ok = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    auto y = render({{3, 0.0, 0, 0.1 * t}});
    add_awgn(y, 0.1, 9000 + t);
    ok += identify(y.data(), y.size(), 300, cfg0, ues).verdict == Verdict::srs_confirmed;
  }
  EXPECT_GE(ok, 0.99 * trials);
}

TEST(FalsePositive, NarrowbandInterferer) {
  std::vector<BandUe> ues = {{1, 0}, {2, 4}};
  auto g = rng::engine(31);
  int fp = 0;
  const int trials = 500;
  const double fs = cfg0.sample_rate_hz();
  for (int t = 0; t < trials; ++t) {
    // CW inside the occupied band, well above the noise
    double f = rng::uniform(g, 0, 24 * 2 * cfg0.subcarrier_spacing_hz());
    cvec y(1000);
    for (std::size_t n = 0; n < y.size(); ++n) y[n] = std::polar(1.0, 2 * pi * f * n / fs + t);
    add_awgn(y, 0.01, 500 + t);
    fp += identify(y.data(), y.size(), 300, cfg0, ues).verdict == Verdict::false_positive;
  }
  EXPECT_GE(fp, 0.9 * trials);
}

TEST(FalsePositive, ZeroWindow) {
  cvec y(1000);
  auto id = identify(y.data(), y.size(), 300, cfg0, {{1, 0}});
  EXPECT_EQ(id.verdict, Verdict::false_positive);
  EXPECT_STREQ(to_string(id.verdict), "false_positive");
}

TEST(Duality, OffsetMovesAllFrequencies) {
  std::vector<BandUe> ues = {{1, 0}, {2, 4}, {3, 2}};
  auto base = identify(render({{0, -5, 0, 0}, {4, -8, 0, 1}, {2, -15, 0, 2}}).data(), 1000, 300,
                       cfg0, ues);
  for (int eps : {-7, -1, 3, 6}) {
    auto y = render({{0, -5, double(eps), 0}, {4, -8, double(eps), 1}, {2, -15, double(eps), 2}});
    auto id = identify(y.data(), y.size(), 300, cfg0, ues);
    ASSERT_EQ(id.mp.components.size(), 3u);
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT(circ(id.mp.components[i].f_hat, base.mp.components[i].f_hat - eps / 64.0), 1e-9);
      EXPECT_EQ(id.mp.components[i].shift_hat, base.mp.components[i].shift_hat);
    }
  }
}
