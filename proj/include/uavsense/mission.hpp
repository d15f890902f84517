#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>

#include "uavsense/channel.hpp"
#include "uavsense/ident.hpp"
#include "uavsense/locate.hpp"
#include "uavsense/sync.hpp"
#include "uavsense/waveform.hpp"

namespace uavsense::mission {

// ---- polygon helpers --------------------------------------------------------

inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

inline double signed_area(const std::vector<Vec2>& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += cross(p[i], p[(i + 1) % p.size()]);
  return 0.5 * s;
}

// Only convex areas are supported; the inset below relies on it.
inline void validate_area(const std::vector<Vec2>& p) {
  if (p.size() < 3) throw ConfigError("area polygon needs at least 3 vertices");
  for (auto& v : p)
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw ConfigError("area polygon: non-finite vertex");
  if (std::abs(signed_area(p)) < 1e-6) throw GeometryError("area polygon is degenerate");
  const double sgn = signed_area(p) > 0 ? 1.0 : -1.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 e0 = p[(i + 1) % n] - p[i], e1 = p[(i + 2) % n] - p[(i + 1) % n];
    if (e0.norm() < 1e-9) throw GeometryError("area polygon has repeated vertices");
    if (sgn * cross(e0, e1) < -1e-9) throw ConfigError("area polygon must be convex");
  }
  // a convex turn sequence can still wind twice
  double turn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 e0 = p[(i + 1) % n] - p[i], e1 = p[(i + 2) % n] - p[(i + 1) % n];
    turn += std::atan2(cross(e0, e1), e0.x * e1.x + e0.y * e1.y);
  }
  if (std::abs(std::abs(turn) - 2 * pi) > 1e-6) throw ConfigError("area polygon is not simple");
}

inline std::vector<Vec2> counter_clockwise(std::vector<Vec2> p) {
  if (signed_area(p) < 0) std::reverse(p.begin(), p.end());
  return p;
}

inline Vec2 centroid(const std::vector<Vec2>& p) {
  double a = 0, cx = 0, cy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    double c = cross(u, v);
    a += c;
    cx += (u.x + v.x) * c;
    cy += (u.y + v.y) * c;
  }
  return {cx / (3 * a), cy / (3 * a)};
}

// Smallest width over edge normals (exact for convex polygons).
inline double min_extent(const std::vector<Vec2>& p) {
  double w = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec2 e = p[(i + 1) % p.size()] - p[i];
    double len = e.norm();
    double far = 0;
    for (auto& v : p) far = std::max(far, std::abs(cross(e, v - p[i])) / len);
    w = std::min(w, far);
  }
  return w;
}

struct BoundingBox {
  double width = 0, height = 0;
};

inline BoundingBox bounding_box(const std::vector<Vec2>& p) {
  double x0 = p[0].x, x1 = p[0].x, y0 = p[0].y, y1 = p[0].y;
  for (auto& v : p) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  return {x1 - x0, y1 - y0};
}

inline std::vector<Vec2> inset_convex(const std::vector<Vec2>& area, double margin) {
  validate_area(area);
  if (margin < 0) throw ConfigError("perimeter margin must be non-negative");
  if (margin >= 0.5 * min_extent(area)) throw GeometryError("perimeter margin too large for the area");
  auto p = counter_clockwise(area);
  if (margin == 0) return p;
  const std::size_t n = p.size();
  std::vector<Vec2> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    // offset lines of edges (j-1, j) and (j, j+1), intersected
    const Vec2 a0 = p[(j + n - 1) % n], a1 = p[j], b1 = p[(j + 1) % n];
    Vec2 da = a1 - a0, db = b1 - a1;
    Vec2 na = Vec2{-da.y, da.x} * (1.0 / da.norm());
    Vec2 nb = Vec2{-db.y, db.x} * (1.0 / db.norm());
    Vec2 pa = a0 + na * margin, pb = a1 + nb * margin;
    double den = cross(da, db);
    if (std::abs(den) < 1e-12) {
      out[j] = a1 + na * margin;  // collinear edges
      continue;
    }
    double t = cross(pb - pa, db) / den;
    out[j] = pa + da * t;
  }
  // every inset edge must keep its direction, otherwise the margin ate it
  for (std::size_t j = 0; j < n; ++j) {
    Vec2 e = out[(j + 1) % n] - out[j], o = p[(j + 1) % n] - p[j];
    if (e.x * o.x + e.y * o.y <= 1e-9) throw GeometryError("perimeter margin too large for the area");
  }
  return out;
}

inline double path_length(const std::vector<Vec2>& pts) {
  double s = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) s += (pts[i] - pts[i - 1]).norm();
  return s;
}

// Points after `a` up to and including `b`, at most `spacing` apart.
inline std::vector<Vec2> subdivide(Vec2 a, Vec2 b, double spacing) {
  if (!(spacing > 0)) throw ConfigError("waypoint spacing must be positive");
  double len = (b - a).norm();
  int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
  std::vector<Vec2> out;
  for (int i = 1; i <= n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return out;
}

// Closed loop on the inset boundary, first and last waypoint identical and
// nearest to `entry` (the area centroid by default).
inline std::vector<Vec2> plan_perimeter(const std::vector<Vec2>& area, double margin, double spacing,
                                        std::optional<Vec2> entry = std::nullopt) {
  auto in = inset_convex(area, margin);
  std::vector<Vec2> ring;
  for (std::size_t i = 0; i < in.size(); ++i) {
    ring.push_back(in[i]);
    auto seg = subdivide(in[i], in[(i + 1) % in.size()], spacing);
    ring.insert(ring.end(), seg.begin(), seg.end() - 1);
  }
  Vec2 e = entry ? *entry : centroid(area);
  std::size_t s = 0;
  for (std::size_t i = 1; i < ring.size(); ++i)
    if ((ring[i] - e).norm() < (ring[s] - e).norm() - 1e-9) s = i;
  std::rotate(ring.begin(), ring.begin() + static_cast<long>(s), ring.end());
  ring.push_back(ring.front());
  return ring;
}

// Closed hexagon around `center`, starting at the vertex nearest `from`.
inline std::vector<Vec2> plan_hex(Vec2 center, double radius, double spacing,
                                  std::optional<Vec2> from = std::nullopt) {
  if (radius < 0 || !std::isfinite(radius)) throw ConfigError("hex radius must be >= 0");
  if (radius < 1e-9) return {center};
  std::array<Vec2, 6> v;
  for (int k = 0; k < 6; ++k)
    v[k] = center + Vec2{std::cos(k * pi / 3), std::sin(k * pi / 3)} * radius;
  int s = 0;
  if (from)
    for (int k = 1; k < 6; ++k)
      if ((v[k] - *from).norm() < (v[s] - *from).norm() - 1e-9) s = k;
  std::vector<Vec2> out{v[s]};
  for (int k = 0; k < 6; ++k) {
    auto seg = subdivide(v[(s + k) % 6], v[(s + k + 1) % 6], spacing);
    out.insert(out.end(), seg.begin(), seg.end());
  }
  return out;
}

// ---- configuration ----------------------------------------------------------

struct ScenarioUe {
  channel::UeProfile profile;
  // drawn per seed when absent: CFO within +-0.5 ppm of fc, TA from the gNB
  // distance, UE antenna gain from a randomly oriented dipole
  std::optional<double> cfo_hz, timing_advance_s, antenna_gain_db;
};

struct Scenario {
  std::string name = "scenario";
  std::vector<Vec2> area;
  Vec2 home;
  Vec3 gnb{0, 0, 25};
  double fc_hz = 2.4e9;
  double noise_figure_db = 7.0;
  channel::PropagationModel rural = channel::PropagationModel::rural();
  channel::PropagationModel urban = channel::PropagationModel::urban();
  waveform::SrsConfig srs;
  std::vector<channel::Antenna> antennas = channel::UavState::default_antennas();
  std::vector<ScenarioUe> ues;
};

struct MissionPlan {
  std::vector<Vec2> area_polygon;
  Vec2 center;
  Vec2 home;
  double altitude_m = 25.0;
  double perimeter_margin_m = 20.0;
  double hex_radius_m = 15.0;
  double speed_mps = 4.0;
  double min_sample_spacing_m = 1.0;
  double waypoint_spacing_m = 1.0;
  double dt_s = 0.1;
  double max_time_s = 3600.0;

  static MissionPlan for_scenario(const Scenario& s) {
    MissionPlan p;
    p.area_polygon = s.area;
    p.center = centroid(s.area);
    p.home = s.home;
    return p;
  }

  void validate() const {
    validate_area(area_polygon);
    if (!(speed_mps > 0) || speed_mps > channel::UavState::max_speed)
      throw ConfigError("speed must be in (0, 6] m/s");
    if (!(altitude_m > 0)) throw ConfigError("altitude must be positive");
    if (!(min_sample_spacing_m > 0)) throw ConfigError("min sample spacing must be positive");
    if (!(waypoint_spacing_m > 0)) throw ConfigError("waypoint spacing must be positive");
    if (!(dt_s > 0)) throw ConfigError("dt must be positive");
    if (hex_radius_m < 0) throw ConfigError("hex radius must be >= 0");
    if (perimeter_margin_m >= 0.5 * min_extent(area_polygon))
      throw GeometryError("perimeter margin too large for the area");
  }
};

struct Processing {
  double m_th = 0.6;
  double gamma_th = 0.6;
  double beta = 0.5;
  double delta = 1e-4;
  ident::MpOptions mp;
  int max_misses = 5;          // consecutive false positives before re-acquiring
  double reacquire_s = 1.0;    // pause between failed acquisition attempts
};

namespace seed_tag {
inline constexpr std::uint64_t cfo = 1, ue_gain = 2, fading = 3, noise = 4, acq_noise = 5;
}

inline std::vector<channel::UeProfile> resolve_ues(const Scenario& s, std::uint64_t seed) {
  std::vector<channel::UeProfile> out;
  std::set<int> ids;
  std::set<std::pair<int, int>> labels;
  const double cfo_max = 0.5e-6 * s.fc_hz;
  for (const auto& u : s.ues) {
    auto p = u.profile;
    if (!ids.insert(p.ue_id).second) throw ConfigError("duplicate ue_id " + std::to_string(p.ue_id));
    if (p.shift_index_w < 0 || p.shift_index_w > 7) throw ConfigError("UE shift outside 0..7");
    if (p.band_id < 0) throw ConfigError("band_id must be >= 0");
    if (!labels.insert({p.band_id, p.shift_index_w}).second)
      throw ConfigError("two UEs share band " + std::to_string(p.band_id) + " shift " +
                        std::to_string(p.shift_index_w));
    const auto id = static_cast<std::uint64_t>(p.ue_id);
    if (u.cfo_hz) {
      if (std::abs(*u.cfo_hz) > cfo_max * (1 + 1e-12))
        throw ConfigError("UE CFO exceeds 0.5 ppm of the carrier");
      p.cfo_hz = *u.cfo_hz;
    } else {
      auto g = rng::engine(rng::derive(seed, {seed_tag::cfo, id}));
      p.cfo_hz = rng::uniform(g, -cfo_max, cfo_max);
    }
    p.timing_advance_s = u.timing_advance_s ? *u.timing_advance_s
                                            : (p.position - s.gnb).norm() / c_light;
    p.antenna_gain_db = u.antenna_gain_db
                            ? *u.antenna_gain_db
                            : channel::draw_ue_antenna_gain_db(rng::derive(seed, {seed_tag::ue_gain, id}));
    out.push_back(p);
  }
  return out;
}

// ---- state ------------------------------------------------------------------

enum class Phase { to_center, perimeter, refine, return_home, done };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::to_center: return "to_center";
    case Phase::perimeter: return "perimeter";
    case Phase::refine: return "refine";
    case Phase::return_home: return "return_home";
    case Phase::done: return "done";
  }
  return "?";
}

struct Waypoint {
  Vec2 xy;
  std::string tag;  // label of the leg that ends here
};

struct UeEstimates {
  std::optional<locate::LocalizationEstimate> initial, refined;
  double t_initial_s = std::numeric_limits<double>::quiet_NaN();
  double t_refined_s = std::numeric_limits<double>::quiet_NaN();
};

struct PhaseSpan {
  std::string phase;  // "refine:<ue>" for hexagons
  double t_start = 0, t_end = 0;
};

struct DetectionRow {
  double t = 0;
  int band = 0, antenna = 0;
  long iteration = 0;  // SRS period index
  double f_hat = std::numeric_limits<double>::quiet_NaN();
  double gamma_db = std::numeric_limits<double>::quiet_NaN();
  int shift_hat = -1;
  std::string verdict;
};

struct Lane {
  int band = 0, antenna = 0;
  bool synced = false;
  sync::SyncState st;
  long q_sync = 0;
  double eps_ref0 = 0;
  int misses = 0;
  double next_acquire_t = 0;
};

struct MissionState {
  Phase phase = Phase::to_center;
  int refine_ue = -1;
  std::deque<int> refine_queue;
  channel::UavState uav;
  double t = 0;
  std::deque<Waypoint> waypoints;
  std::string leg = "to_center";
  std::vector<locate::Measurement> log;
  std::map<int, UeEstimates> estimates;
  std::vector<PhaseSpan> phases;
  std::vector<DetectionRow> detections;
  std::optional<Vec2> last_sample_xy;
  long last_q = -1;
  std::vector<Lane> lanes;
  int receptions = 0, acquisitions = 0, false_positives = 0;
};

// ---- simulator --------------------------------------------------------------

class Mission {
 public:
  Mission(Scenario scn, MissionPlan plan, Processing proc, std::uint64_t seed)
      : scn_(std::move(scn)), plan_(std::move(plan)), proc_(proc), seed_(seed) {
    plan_.validate();
    scn_.srs.validate();
    ues_ = resolve_ues(scn_, seed_);
    fs_ = scn_.srs.sample_rate_hz();
    T_ = scn_.srs.period_samples();
    Tp_ = static_cast<double>(T_) / fs_;
    noise_mw_ = channel::thermal_noise_mw(fs_, scn_.noise_figure_db);
    scn_.rural.fc_hz = scn_.urban.fc_hz = scn_.fc_hz;
    const double full_scale = std::sqrt(static_cast<double>(scn_.srs.n_fft));
    for (const auto& u : ues_) {
      auto cfg = scn_.srs;
      cfg.shift_index_w = u.shift_index_w;
      IqCapture tx;
      tx.sample_rate_hz = fs_;
      tx.samples = waveform::synthesize_symbol(cfg).samples;
      for (auto& v : tx.samples) v *= full_scale;
      tx_[u.ue_id] = std::move(tx);
      band_ues_[u.band_id].push_back({u.ue_id, u.shift_index_w});
    }
    s_.uav.position = {plan_.home.x, plan_.home.y, plan_.altitude_m};
    s_.uav.antennas = scn_.antennas;
    for (auto& [b, list] : band_ues_)
      for (int a = 0; a < static_cast<int>(scn_.antennas.size()); ++a) {
        Lane ln;
        ln.band = b;
        ln.antenna = a;
        ln.st.beta = proc_.beta;
        ln.st.period_samples = T_;
        s_.lanes.push_back(ln);
      }
    for (auto& p : subdivide(plan_.home, plan_.center, plan_.waypoint_spacing_m))
      s_.waypoints.push_back({p, "to_center"});
    s_.phases.push_back({"to_center", 0, 0});
  }

  const MissionState& state() const { return s_; }
  const std::vector<channel::UeProfile>& ues() const { return ues_; }
  const Scenario& scenario() const { return scn_; }
  const MissionPlan& plan() const { return plan_; }
  bool done() const { return s_.phase == Phase::done; }

  void step(double dt) {
    if (!(dt > 0)) throw ConfigError("dt must be positive");
    if (done()) return;
    move(dt);
    s_.t += dt;
    maybe_receive();
    advance_phase();
  }

  void run() {
    while (!done()) {
      if (s_.t > plan_.max_time_s) throw ConfigError("mission exceeded max_time_s");
      step(plan_.dt_s);
    }
  }

 private:
  void move(double dt) {
    Vec2 p0 = xy(s_.uav.position), p = p0;
    double budget = plan_.speed_mps * dt;
    while (!s_.waypoints.empty()) {
      const Waypoint& w = s_.waypoints.front();
      Vec2 d = w.xy - p;
      double len = d.norm();
      s_.leg = w.tag;
      if (len <= budget + 1e-12) {
        p = w.xy;
        budget -= len;
        s_.waypoints.pop_front();
        if (budget <= 0) break;
      } else {
        p = p + d * (budget / len);
        break;
      }
    }
    Vec2 v = (p - p0) * (1.0 / dt);
    s_.uav.position = {p.x, p.y, plan_.altitude_m};
    s_.uav.velocity = {v.x, v.y, 0};
  }

  // UE signals of period q rendered on [n0, n0 + len) for one antenna.
  cvec render(int band, int antenna, long q_first, long q_last, long n0, std::size_t len,
              const std::map<int, std::vector<std::vector<channel::ChannelPath>>>& paths) const {
    cvec y(len);
    for (const auto& u : ues_) {
      if (u.band_id != band) continue;
      for (long q = q_first; q <= q_last; ++q) {
        IqCapture tx = tx_.at(u.ue_id);
        tx.t0_s = static_cast<double>(q) * Tp_;
        auto out = channel::propagate_into(tx, paths.at(u.ue_id)[antenna], u,
                                           static_cast<double>(n0) / fs_, len);
        for (std::size_t i = 0; i < len; ++i) y[i] += out.samples[i];
      }
    }
    return y;
  }

  void add_noise(cvec& y, std::uint64_t seed) const {
    auto g = rng::engine(seed);
    for (auto& v : y) v += rng::cgauss(g, noise_mw_);
  }

  std::optional<ident::Identification> acquire(Lane& ln, long q, const auto& paths) {
    ++s_.acquisitions;
    const long n0 = std::llround(s_.t * fs_);
    const std::size_t len = static_cast<std::size_t>(2 * T_);
    const long qa = n0 / T_ - 1, qb = (n0 + 2 * T_) / T_ + 1;
    cvec y = render(ln.band, ln.antenna, qa, qb, n0, len, paths);
    add_noise(y, rng::derive(seed_, {seed_tag::acq_noise, static_cast<std::uint64_t>(q),
                                     static_cast<std::uint64_t>(ln.band),
                                     static_cast<std::uint64_t>(ln.antenna)}));
    const int L = scn_.srs.half_len();
    auto trace = sync::repetition_metric(y.data(), y.size(), L, scn_.srs.cp_len);
    auto det = sync::detect(trace, proc_.m_th, proc_.delta);
    ln.next_acquire_t = s_.t + proc_.reacquire_s;
    if (!det || *det + L > static_cast<long>(len)) return std::nullopt;
    auto id = ident::identify(y.data(), y.size(), *det, scn_.srs, band_ues_.at(ln.band), proc_.mp,
                              ln.band);
    if (id.verdict == ident::Verdict::false_positive || !id.cleaned.eps_ref) {
      ++s_.false_positives;
      return std::nullopt;
    }
    const long b = n0 + *det;
    ln.synced = true;
    ln.misses = 0;
    ln.q_sync = std::lround(static_cast<double>(b) / static_cast<double>(T_));
    ln.st.n_sync = b;
    ln.st.eps_filtered = 0;
    ln.st.q = 0;
    ln.st.last_metric = trace.m_f[*det];
    ln.st.est_snr_db = sync::estimate_snr(trace.m_f[*det]).db;
    ln.eps_ref0 = *id.cleaned.eps_ref;
    return id;
  }

  std::optional<ident::Identification> receive(Lane& ln, long q, const auto& paths) {
    const long k = q - ln.q_sync;
    const double nominal = static_cast<double>(ln.st.n_sync) + static_cast<double>(k * T_);
    const long w = std::llround(ln.st.expected(static_cast<int>(k)));
    const int L = scn_.srs.half_len();
    cvec y = render(ln.band, ln.antenna, q, q, w, static_cast<std::size_t>(L), paths);
    add_noise(y, rng::derive(seed_, {seed_tag::noise, static_cast<std::uint64_t>(q),
                                     static_cast<std::uint64_t>(ln.band),
                                     static_cast<std::uint64_t>(ln.antenna)}));
    auto id = ident::identify(y.data(), y.size(), 0, scn_.srs, band_ues_.at(ln.band), proc_.mp,
                              ln.band);
    if (id.verdict == ident::Verdict::false_positive || !id.cleaned.eps_ref) {
      ++s_.false_positives;
      if (++ln.misses >= proc_.max_misses) {
        ln.synced = false;
        ln.next_acquire_t = s_.t;
      }
      return id;
    }
    ln.misses = 0;
    double eps_abs = (static_cast<double>(w) - nominal) + (*id.cleaned.eps_ref - ln.eps_ref0);
    ln.st = sync::track(ln.st, static_cast<int>(k), eps_abs);
    return id;
  }

  void maybe_receive() {
    if (s_.lanes.empty()) return;
    const long q = static_cast<long>(std::floor(s_.t / Tp_ + 1e-9));
    if (q <= s_.last_q) return;
    Vec2 p = xy(s_.uav.position);
    if (s_.last_sample_xy && (p - *s_.last_sample_xy).norm() < plan_.min_sample_spacing_m - 1e-9)
      return;
    s_.last_q = q;
    s_.last_sample_xy = p;
    ++s_.receptions;

    std::map<int, std::vector<std::vector<channel::ChannelPath>>> paths;
    const auto fseed = rng::derive(seed_, {seed_tag::fading, static_cast<std::uint64_t>(q)});
    for (const auto& u : ues_) {
      const auto& model = u.mode == channel::ChannelMode::rural ? scn_.rural : scn_.urban;
      paths[u.ue_id] = channel::geometry_paths(u, s_.uav, model, fseed);
    }

    const std::size_t n_ant = scn_.antennas.size();
    locate::Measurement m;
    m.r = static_cast<int>(s_.log.size());
    m.uav_xy = p;
    m.timestamp_s = s_.t;
    m.phase = s_.leg;
    for (const auto& u : ues_) m.per_antenna_gamma[u.ue_id].assign(n_ant, std::nullopt);
    bool any = false;

    for (auto& ln : s_.lanes) {
      std::optional<ident::Identification> id;
      if (ln.synced)
        id = receive(ln, q, paths);
      else if (s_.t + 1e-9 >= ln.next_acquire_t)
        id = acquire(ln, q, paths);
      if (!id) continue;
      if (id->mp.components.empty()) {
        DetectionRow r;
        r.t = s_.t;
        r.band = ln.band;
        r.antenna = ln.antenna;
        r.iteration = q;
        r.verdict = ident::to_string(id->verdict);
        s_.detections.push_back(r);
        continue;
      }
      for (const auto& c : ident::retained(id->mp.components)) {
        DetectionRow r;
        r.t = s_.t;
        r.band = ln.band;
        r.antenna = ln.antenna;
        r.iteration = q;
        r.f_hat = c.f_hat;
        r.gamma_db = c.gamma_db;
        r.shift_hat = c.shift_hat;
        r.verdict = ident::to_string(id->verdict);
        s_.detections.push_back(r);
      }
      if (id->verdict != ident::Verdict::srs_confirmed) continue;
      for (const auto& [ue, g] : id->cleaned.gamma_max_db)
        if (g) {
          m.per_antenna_gamma[ue][ln.antenna] = *g;
          any = true;
        }
    }
    if (any) s_.log.push_back(std::move(m));
  }

  locate::LocalizationEstimate estimate(int ue, const std::string& tag, double hx, double hy) const {
    std::vector<locate::Measurement> sel;
    for (const auto& m : s_.log)
      if (m.phase == tag) sel.push_back(m);
    locate::MeanShiftOptions o;
    o.hx = hx;
    o.hy = hy;
    return locate::localize(sel, ue, proc_.gamma_th, o);
  }

  void begin_phase(Phase p, const std::string& label) {
    s_.phases.back().t_end = s_.t;
    s_.phase = p;
    s_.phases.push_back({label, s_.t, s_.t});
  }

  void start_hex() {
    const int ue = s_.refine_queue.front();
    s_.refine_queue.pop_front();
    s_.refine_ue = ue;
    const std::string tag = "refine:" + std::to_string(ue);
    begin_phase(Phase::refine, tag);
    Vec2 here = xy(s_.uav.position);
    auto hex = plan_hex(s_.estimates[ue].initial->m_hat, plan_.hex_radius_m,
                        plan_.waypoint_spacing_m, here);
    if ((hex.front() - here).norm() > 1e-9)
      for (auto& p : subdivide(here, hex.front(), plan_.waypoint_spacing_m))
        s_.waypoints.push_back({p, "transit"});
    for (std::size_t i = 1; i < hex.size(); ++i) s_.waypoints.push_back({hex[i], tag});
    if (hex.size() == 1) s_.waypoints.push_back({hex[0], tag});
  }

  void go_home() {
    begin_phase(Phase::return_home, "return_home");
    Vec2 here = xy(s_.uav.position);
    if ((plan_.home - here).norm() > 1e-9)
      for (auto& p : subdivide(here, plan_.home, plan_.waypoint_spacing_m))
        s_.waypoints.push_back({p, "return_home"});
  }

  void advance_phase() {
    while (s_.waypoints.empty() && s_.phase != Phase::done) {
      switch (s_.phase) {
        case Phase::to_center: {
          begin_phase(Phase::perimeter, "perimeter");
          auto loop = plan_perimeter(plan_.area_polygon, plan_.perimeter_margin_m,
                                     plan_.waypoint_spacing_m, plan_.center);
          Vec2 here = xy(s_.uav.position);
          for (auto& p : subdivide(here, loop.front(), plan_.waypoint_spacing_m))
            s_.waypoints.push_back({p, "transit"});
          for (std::size_t i = 1; i < loop.size(); ++i) s_.waypoints.push_back({loop[i], "perimeter"});
          break;
        }
        case Phase::perimeter: {
          auto bb = bounding_box(plan_.area_polygon);
          for (const auto& u : ues_) {
            auto est = estimate(u.ue_id, "perimeter", 0.5 * bb.width, 0.5 * bb.height);
            auto& e = s_.estimates[u.ue_id];
            e.initial = est;
            e.t_initial_s = s_.t;
            if (est.status == locate::Status::ok) s_.refine_queue.push_back(u.ue_id);
          }
          if (s_.refine_queue.empty())
            go_home();
          else
            start_hex();
          break;
        }
        case Phase::refine: {
          // kernel sized like the initial one: half the hexagon's width and height
          const double r = std::max(plan_.hex_radius_m, plan_.min_sample_spacing_m);
          const std::string tag = "refine:" + std::to_string(s_.refine_ue);
          auto& e = s_.estimates[s_.refine_ue];
          e.refined = estimate(s_.refine_ue, tag, r, r * std::sqrt(3.0) / 2);
          e.t_refined_s = s_.t;
          if (s_.refine_queue.empty())
            go_home();
          else
            start_hex();
          break;
        }
        case Phase::return_home:
          begin_phase(Phase::done, "done");
          break;
        case Phase::done:
          break;
      }
    }
  }

  Scenario scn_;
  MissionPlan plan_;
  Processing proc_;
  std::uint64_t seed_;
  std::vector<channel::UeProfile> ues_;
  std::map<int, IqCapture> tx_;
  std::map<int, std::vector<ident::BandUe>> band_ues_;
  double fs_ = 0, Tp_ = 0, noise_mw_ = 0;
  long T_ = 0;
  MissionState s_;
};

// ---- report -----------------------------------------------------------------

struct UeResult {
  int ue_id = 0, band = 0, shift = 0;
  Vec2 truth;
  bool los = true;
  int n_records = 0;  // records with a finite gamma for this UE
  UeEstimates est;
  std::optional<double> le_initial, le_refined;
};

struct MissionReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<PhaseSpan> phases;
  std::vector<locate::Measurement> log;
  std::vector<DetectionRow> detections;
  std::vector<UeResult> ues;
  std::optional<double> ale_initial, ale_refined;
  double total_time_s = 0;
  double initial_phase_s = 0;  // takeoff to end of perimeter
  int receptions = 0, acquisitions = 0, false_positives = 0;
};

inline MissionReport make_report(const Mission& m, std::uint64_t seed) {
  const auto& s = m.state();
  MissionReport r;
  r.scenario = m.scenario().name;
  r.seed = seed;
  r.phases = s.phases;
  r.log = s.log;
  r.detections = s.detections;
  r.total_time_s = s.t;
  r.receptions = s.receptions;
  r.acquisitions = s.acquisitions;
  r.false_positives = s.false_positives;
  for (auto& p : s.phases)
    if (p.phase == "perimeter") r.initial_phase_s = p.t_end;
  rvec li, lr;
  for (const auto& u : m.ues()) {
    UeResult x;
    x.ue_id = u.ue_id;
    x.band = u.band_id;
    x.shift = u.shift_index_w;
    x.truth = xy(u.position);
    x.los = u.los;
    for (const auto& rec : s.log)
      if (locate::select_antenna(rec, u.ue_id)) ++x.n_records;
    auto it = s.estimates.find(u.ue_id);
    if (it != s.estimates.end()) x.est = it->second;
    if (x.est.initial && x.est.initial->status == locate::Status::ok) {
      x.le_initial = locate::localization_error(x.est.initial->m_hat, x.truth);
      li.push_back(*x.le_initial);
    }
    if (x.est.refined && x.est.refined->status == locate::Status::ok) {
      x.le_refined = locate::localization_error(x.est.refined->m_hat, x.truth);
      lr.push_back(*x.le_refined);
    }
    r.ues.push_back(std::move(x));
  }
  if (!li.empty()) r.ale_initial = locate::average_error(li);
  if (!lr.empty()) r.ale_refined = locate::average_error(lr);
  return r;
}

inline MissionReport run_mission(const Scenario& scn, const MissionPlan& plan, std::uint64_t seed,
                                 const Processing& proc = {}) {
  Mission m(scn, plan, proc, seed);
  m.run();
  return make_report(m, seed);
}

}  // namespace uavsense::mission
