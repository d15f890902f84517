#include <gtest/gtest.h>

#include "oracle.hpp"
#include "uavsense/channel.hpp"
#include "uavsense/waveform.hpp"

using namespace uavsense;
using namespace uavsense::channel;

namespace {

UavState uav_at(Vec3 p, Vec3 v = {}) {
  UavState u;
  u.position = p;
  u.velocity = v;
  Antenna iso;  // flat 0 dBi table
  iso.pattern.kind = AntennaPattern::Kind::tabulated;
  iso.pattern.table.az_deg = {0, 180};
  iso.pattern.table.el_deg = {-90, 90};
  iso.pattern.table.gain_db = {{0, 0}, {0, 0}};
  u.antennas = {iso};
  return u;
}

IqCapture full_scale_symbol_capture(const waveform::SrsConfig& c, std::size_t len, long at) {
  auto s = waveform::synthesize_symbol(c);
  IqCapture cap;
  cap.sample_rate_hz = c.sample_rate_hz();
  cap.samples.assign(len, cplx{});
  const double k = std::sqrt(static_cast<double>(c.n_fft));
  for (std::size_t n = 0; n < s.samples.size(); ++n) cap.samples[at + n] = s.samples[n] * k;
  return cap;
}

}  // namespace

TEST(Geometry, FreeSpaceAt100m) {
  UeProfile ue;
  ue.position = {100, 0, 0};
  PropagationModel m;
  m.fc_hz = 2.4e9;
  m.reflections = false;
  auto p = geometry_paths(ue, uav_at({0, 0, 0}), m, 1);
  ASSERT_EQ(p.size(), 1u);
  ASSERT_EQ(p[0].size(), 1u);
  EXPECT_NEAR(p[0][0].delay_s * 1e9, 333.564, 1e-3);
  EXPECT_NEAR(-db10(std::norm(p[0][0].gain)), 80.05, 0.01);
  EXPECT_NEAR(free_space_loss_db(100, 2.4e9), 80.05, 0.01);
  EXPECT_EQ(p[0][0].doppler_hz, 0.0);
}

TEST(Geometry, StationaryUavHasNoDoppler) {
  UeProfile ue;
  ue.position = {30, -20, 1};
  auto p = geometry_paths(ue, uav_at({0, 0, 25}), PropagationModel::urban(), 9);
  for (auto& path : p[0]) EXPECT_EQ(path.doppler_hz, 0.0);
}

TEST(Geometry, DopplerFromApproach) {
  UeProfile ue;
  ue.position = {100, 0, 0};
  PropagationModel m;
  m.reflections = false;
  auto p = geometry_paths(ue, uav_at({0, 0, 0}, {5, 0, 0}), m, 1);
  EXPECT_NEAR(p[0][0].doppler_hz, 5.0 * 2.4e9 / c_light, 1e-9);
}

TEST(Geometry, BlockageOnlyAffectsDirectPath) {
  UeProfile ue;
  ue.position = {40, 10, 1.5};
  ue.mode = ChannelMode::urban;
  auto m = PropagationModel::urban();
  auto uav = UavState{};
  uav.position = {0, 0, 25};
  uav.antennas = UavState::default_antennas();
  auto los = geometry_paths(ue, uav, m, 77);
  ue.los = false;
  auto nlos = geometry_paths(ue, uav, m, 77);
  ASSERT_EQ(los.size(), nlos.size());
  for (std::size_t a = 0; a < los.size(); ++a) {
    EXPECT_NEAR(db10(std::norm(los[a][0].gain)) - db10(std::norm(nlos[a][0].gain)), 15.0, 1e-9);
    ASSERT_EQ(los[a].size(), 5u);
    for (std::size_t i = 1; i < los[a].size(); ++i) {
      EXPECT_EQ(los[a][i].gain, nlos[a][i].gain);
      EXPECT_EQ(los[a][i].delay_s, nlos[a][i].delay_s);
    }
  }
}

TEST(Geometry, DelaysStrictlyAscendingAndAntennasIndependent) {
  UeProfile ue;
  ue.position = {25, 5, 1};
  auto m = PropagationModel::urban();
  m.n_refl = 12;
  UavState uav;
  uav.position = {0, 0, 25};
  uav.antennas = UavState::default_antennas();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto p = geometry_paths(ue, uav, m, seed);
    for (auto& per : p)
      for (std::size_t i = 1; i < per.size(); ++i) EXPECT_GT(per[i].delay_s, per[i - 1].delay_s);
    EXPECT_NE(p[0][1].gain, p[1][1].gain);
  }
}

TEST(Geometry, CoincidentPositionsRejected) {
  UeProfile ue;
  ue.position = {1, 2, 3};
  EXPECT_THROW(geometry_paths(ue, uav_at({1, 2, 3}), PropagationModel{}, 0), GeometryError);
}

TEST(Geometry, Reproducible) {
  UeProfile ue;
  ue.position = {25, 5, 1};
  UavState uav;
  uav.position = {3, 1, 25};
  uav.velocity = {2, 1, 0};
  uav.antennas = UavState::default_antennas();
  auto a = geometry_paths(ue, uav, PropagationModel::urban(), 5);
  auto b = geometry_paths(ue, uav, PropagationModel::urban(), 5);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      EXPECT_EQ(a[i][j].gain, b[i][j].gain);
      EXPECT_EQ(a[i][j].delay_s, b[i][j].delay_s);
      EXPECT_EQ(a[i][j].doppler_hz, b[i][j].doppler_hz);
    }
}

TEST(Antenna, DipoleBroadsideAndNull) {
  AntennaPattern p;
  p.axis = {0, 0, 1};
  EXPECT_NEAR(antenna_gain(p, {1, 0, 0}), 2.15, 0.01);
  EXPECT_NEAR(antenna_gain(p, {0, 1, 0}), 2.15, 0.01);
  EXPECT_LE(antenna_gain(p, {0, 0, 1}), -30.0);
  EXPECT_LE(antenna_gain(p, {0, 0, -1}), -30.0);
  EXPECT_LE(antenna_gain(p, {1e-4, 0, 1}), -30.0);
  // monotone from broadside to axis
  double prev = 10;
  for (int d = 0; d <= 90; d += 5) {
    double th = d * pi / 180;
    double g = antenna_gain(p, {std::cos(th), 0, std::sin(th)});
    EXPECT_LE(g, prev + 1e-12);
    prev = g;
  }
}

TEST(Antenna, TabulatedExactOnGridAndInterpolates) {
  AntennaPattern p;
  p.kind = AntennaPattern::Kind::tabulated;
  p.table.az_deg = {0, 90, 180, 270};
  p.table.el_deg = {-90, 0, 90};
  p.table.gain_db = {{-10, -11, -12, -13}, {0, 1, 2, 3}, {-20, -21, -22, -23}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double az = p.table.az_deg[j] * pi / 180, el = p.table.el_deg[i] * pi / 180;
      Vec3 d{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
      if (i != 1) continue;  // azimuth undefined at the poles
      EXPECT_NEAR(antenna_gain(p, d), p.table.gain_db[i][j], 1e-9);
    }
  EXPECT_NEAR(p.table.lookup(45, 0), 0.5, 1e-12);
  EXPECT_NEAR(p.table.lookup(315, 0), 1.5, 1e-12);  // wraps 270 -> 360
  EXPECT_NEAR(p.table.lookup(0, 45), -10, 1e-12);
  EXPECT_NEAR(p.table.lookup(90, -90), -11, 1e-12);
}

TEST(Antenna, FromCuts) {
  auto t = TabulatedPattern::from_cuts({0, 90, 180, 270}, {0, -3, -6, -3}, {-90, 0, 90},
                                       {-20, 2, -20});
  EXPECT_NEAR(t.lookup(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(t.lookup(90, 0), -3.0, 1e-12);
  EXPECT_NEAR(t.lookup(180, 90), -6.0 - 22.0, 1e-12);
}

TEST(Propagate, IdentityChannel) {
  waveform::SrsConfig c;
  auto tx = full_scale_symbol_capture(c, 400, 50);
  UeProfile ue;
  ue.tx_power_dbm = 0;
  std::vector<ChannelPath> p{{cplx(1, 0), 0.0, 0.0}};
  auto y = propagate(tx, p, ue);
  ASSERT_EQ(y.samples.size(), tx.samples.size());
  for (std::size_t n = 0; n < y.samples.size(); ++n)
    EXPECT_LE(std::abs(y.samples[n] - tx.samples[n]), 1e-12 * (1 + std::abs(tx.samples[n])));
}

TEST(Propagate, CfoPhaseRamp) {
  waveform::SrsConfig c;
  auto tx = full_scale_symbol_capture(c, 300, 10);
  UeProfile ue;
  ue.tx_power_dbm = 0;
  ue.cfo_hz = 1000;
  auto y = propagate(tx, {{cplx(1, 0), 0.0, 0.0}}, ue);
  const double step = 2 * pi * 1000 / c.sample_rate_hz();
  for (std::size_t n = 11; n < 140; ++n) {
    cplx a = y.samples[n] * std::conj(tx.samples[n]);
    cplx b = y.samples[n - 1] * std::conj(tx.samples[n - 1]);
    EXPECT_NEAR(std::arg(a * std::conj(b)), step, 1e-9);
  }
}

TEST(Propagate, IntegerDelayAndTimingAdvance) {
  waveform::SrsConfig c;
  const double fs = c.sample_rate_hz();
  auto tx = full_scale_symbol_capture(c, 400, 20);
  UeProfile ue;
  ue.tx_power_dbm = 0;
  ue.timing_advance_s = 2 / fs;
  auto y = propagate(tx, {{cplx(1, 0), 7 / fs, 0.0}}, ue);  // net 5 samples
  for (std::size_t n = 5; n < 400; ++n) EXPECT_NEAR(std::abs(y.samples[n] - tx.samples[n - 5]), 0, 1e-12);
}

TEST(Propagate, FractionalDelayMatchesBandLimitedShift) {
  // Periodic half-symbol: exact delay is a phase ramp on its DFT bins.
  waveform::SrsConfig c;
  auto h = waveform::half_symbol(c);
  const int L = c.half_len();
  IqCapture tx;
  tx.sample_rate_hz = c.sample_rate_hz();
  for (int r = 0; r < 20; ++r) tx.samples.insert(tx.samples.end(), h.begin(), h.end());
  UeProfile ue;
  ue.tx_power_dbm = 0;
  for (double mu : {0.25, 0.5, 0.8}) {
    auto y = propagate(tx, {{cplx(1, 0), mu / tx.sample_rate_hz, 0.0}}, ue);
    auto H = oracle::dft(std::vector<oracle::cd>(h.begin(), h.end()));
    for (int k = 0; k < L; ++k) H[k] *= std::exp(oracle::cd(0, -2 * oracle::kPi * k * mu / L));
    auto want = oracle::dft(H, +1);
    double err = 0, ref = 0;
    for (int n = 0; n < L; ++n) {
      err += std::norm(y.samples[8 * L + n] - want[n] / double(L));
      ref += std::norm(want[n] / double(L));
    }
    EXPECT_LT(std::sqrt(err / ref), 1e-3) << mu;
  }
}

TEST(Propagate, TwoPathMatchedFilterPeaks) {
  waveform::SrsConfig c;
  const double fs = c.sample_rate_hz();
  auto s = waveform::synthesize_symbol(c).samples;
  auto tx = full_scale_symbol_capture(c, 600, 100);
  UeProfile ue;
  ue.tx_power_dbm = 0;
  auto y = propagate(tx, {{cplx(1, 0), 0.0, 0.0}, {cplx(0.5, 0), 3 / fs, 0.0}}, ue);
  auto mf = [&](int d) {
    cplx acc{};
    for (std::size_t n = 0; n < s.size(); ++n) acc += y.samples[100 + d + n] * std::conj(s[n]);
    return std::abs(acc);
  };
  // peaks at lags 0 and 3, about 6 dB apart
  EXPECT_GT(mf(0), mf(-1));
  EXPECT_GT(mf(0), mf(1));
  EXPECT_GT(mf(3), mf(2));
  EXPECT_GT(mf(3), mf(4));
  // oracle: superposed clean autocorrelations R(d) + 0.5 R(d-3)
  auto R = [&](int d) {
    cplx acc{};
    for (int n = 0; n < static_cast<int>(s.size()); ++n) {
      int k = n + d;
      if (k >= 0 && k < static_cast<int>(s.size())) acc += s[k] * std::conj(s[n]);
    }
    return acc * std::sqrt(static_cast<double>(c.n_fft));
  };
  const double want0 = std::abs(R(0) + 0.5 * R(-3)), want3 = std::abs(R(3) + 0.5 * R(0));
  EXPECT_NEAR(mf(0), want0, 1e-9 * want0);
  EXPECT_NEAR(mf(3), want3, 1e-9 * want3);
  // the sinc sidelobe at 3 samples (about 11% at 1.4 MHz) bends the 6 dB gap
  EXPECT_NEAR(20 * std::log10(mf(0) / mf(3)), 6.02, 2.0);
}

TEST(Propagate, Linearity) {
  waveform::SrsConfig c;
  const double fs = c.sample_rate_hz();
  auto tx = full_scale_symbol_capture(c, 500, 40);
  IqCapture tx2 = tx;
  const cplx a(0.3, -1.7);
  for (auto& v : tx2.samples) v *= a;
  UeProfile ue;
  ue.cfo_hz = 321;
  ue.clock_drift_ppm = 0.05;
  ue.timing_advance_s = 0.4 / fs;
  std::vector<ChannelPath> p{{cplx(0.2, 0.1), 3.3 / fs, 12.0}, {cplx(-0.05, 0.02), 5.9 / fs, -4.0}};
  auto y1 = propagate(tx, p, ue), y2 = propagate(tx2, p, ue);
  for (std::size_t n = 0; n < y1.samples.size(); ++n)
    EXPECT_LE(std::abs(y2.samples[n] - a * y1.samples[n]), 1e-12 * (1 + std::abs(y2.samples[n])));
}

TEST(Propagate, DriftSkewResetsEverySecond) {
  EXPECT_NEAR(drift_skew_s(0.05, 0.5), 0.025e-6, 1e-18);
  EXPECT_NEAR(drift_skew_s(0.05, 1.0), 0.0, 1e-18);
  EXPECT_NEAR(drift_skew_s(0.05, 2.25), 0.0125e-6, 1e-18);
}

TEST(Propagate, PowerAccountingMatchesMeasuredSnr) {
  waveform::SrsConfig c;
  const double fs = c.sample_rate_hz();
  UeProfile ue;
  ue.position = {60, 30, 1.5};
  ue.tx_power_dbm = -20;
  PropagationModel m;
  m.reflections = false;
  auto uav = uav_at({0, 0, 25});
  auto paths = geometry_paths(ue, uav, m, 3)[0];
  const double nf = 7.0;
  const double predicted = ue.tx_power_dbm + db10(std::norm(paths[0].gain)) -
                           db10(thermal_noise_mw(fs, nf));
  const long at = 200;
  auto tx = full_scale_symbol_capture(c, 2000, at);
  // measured SNR averaged over 100 noise realizations
  double acc = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    auto g = rng::engine(rng::derive(11, {static_cast<std::uint64_t>(t)}));
    auto y = propagate(tx, paths, ue, nf, &g);
    const long d = std::lround(paths[0].delay_s * fs);
    double ps = 0, pn = 0;
    for (long n = at + d + c.cp_len; n < at + d + c.cp_len + c.n_fft; ++n) ps += std::norm(y.samples[n]);
    for (long n = 800; n < 2000; ++n) pn += std::norm(y.samples[n]);
    ps /= c.n_fft;
    pn /= 1200;
    acc += (ps - pn) / pn;
  }
  EXPECT_NEAR(db10(acc / trials), predicted, 0.5);
}

TEST(Superpose, IdentityNegationAndPowerSum) {
  waveform::SrsConfig c;
  auto tx = full_scale_symbol_capture(c, 300, 0);
  auto one = superpose({tx});
  EXPECT_EQ(one.samples, tx.samples);
  IqCapture neg = tx;
  for (auto& v : neg.samples) v = -v;
  for (auto v : superpose({tx, neg}).samples) EXPECT_EQ(v, cplx{});

  std::vector<IqCapture> ues;
  double analytic = 0;
  const int shifts[] = {0, 4, 2};
  const double dbfs[] = {-5, -8, -15};
  for (int i = 0; i < 3; ++i) {
    waveform::SrsConfig ci = c;
    ci.shift_index_w = shifts[i];
    auto t = full_scale_symbol_capture(ci, 300, 0);
    for (auto& v : t.samples) v *= std::sqrt(from_db10(dbfs[i]));
    analytic += from_db10(dbfs[i]);
    ues.push_back(t);
  }
  auto sum = superpose(ues);
  double p = 0;
  for (int n = c.cp_len; n < c.cp_len + c.n_fft; ++n) p += std::norm(sum.samples[n]);
  p /= c.n_fft;
  EXPECT_NEAR(db10(p), db10(analytic), 0.2);

  IqCapture other = tx;
  other.sample_rate_hz *= 2;
  EXPECT_THROW(superpose({tx, other}), ConfigError);
  EXPECT_THROW(superpose({}), ConfigError);
}

TEST(Propagate, SameSeedBitIdentical) {
  waveform::SrsConfig c;
  auto tx = full_scale_symbol_capture(c, 500, 40);
  UeProfile ue;
  ue.cfo_hz = 100;
  std::vector<ChannelPath> p{{cplx(1e-3, 0), 1e-7, 3.0}};
  auto g1 = rng::engine(42), g2 = rng::engine(42);
  auto a = propagate(tx, p, ue, 7.0, &g1);
  auto b = propagate(tx, p, ue, 7.0, &g2);
  EXPECT_EQ(a.samples, b.samples);
}
