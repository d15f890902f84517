#pragma once

#include "uavsense/mission.hpp"

// Built-in scenarios. configs/*.json hold the same values.
namespace uavsense::presets {

inline std::vector<Vec2> rectangle(double w, double h) { return {{0, 0}, {w, 0}, {w, h}, {0, h}}; }

inline mission::ScenarioUe make_ue(int id, Vec2 p, int band, int shift, double tx_dbm,
                                   channel::ChannelMode mode, bool los = true) {
  mission::ScenarioUe u;
  u.profile.ue_id = id;
  u.profile.position = {p.x, p.y, 1.5};
  u.profile.band_id = band;
  u.profile.shift_index_w = shift;
  u.profile.tx_power_dbm = tx_dbm;
  u.profile.clock_drift_ppm = 0.05;
  u.profile.mode = mode;
  u.profile.los = los;
  return u;
}

// Open field, 120 x 95 m, two groups of three UEs near the middle, one group
// per band, shifts {0, 4, 2}.
inline mission::Scenario rural() {
  mission::Scenario s;
  s.name = "rural";
  s.area = rectangle(120, 95);
  s.home = {0, 0};
  s.gnb = {400, -250, 25};
  const auto m = channel::ChannelMode::rural;
  const int shifts[3] = {0, 4, 2};
  const Vec2 a[3] = {{55, 50.5}, {56, 51.5}, {54, 49.5}};
  const Vec2 b[3] = {{64, 45.5}, {65, 44.5}, {63.5, 46.5}};
  for (int i = 0; i < 3; ++i) s.ues.push_back(make_ue(1 + i, a[i], 0, shifts[i], 10.0, m));
  for (int i = 0; i < 3; ++i) s.ues.push_back(make_ue(4 + i, b[i], 1, shifts[i], 10.0, m));
  return s;
}

// Built-up block, 120 x 80 m, UEs spread over the area, two of them blocked.
inline mission::Scenario urban() {
  mission::Scenario s;
  s.name = "urban";
  s.area = rectangle(120, 80);
  s.home = {0, 0};
  s.gnb = {-150, 200, 30};
  const auto m = channel::ChannelMode::urban;
  s.ues.push_back(make_ue(1, {45, 35}, 0, 0, 23.0, m));
  s.ues.push_back(make_ue(2, {72, 48}, 0, 4, 23.0, m));
  s.ues.push_back(make_ue(3, {60, 30}, 0, 2, 23.0, m, false));
  s.ues.push_back(make_ue(4, {52, 46}, 1, 0, 23.0, m));
  s.ues.push_back(make_ue(5, {75, 34}, 1, 4, 23.0, m, false));
  s.ues.push_back(make_ue(6, {64, 42}, 1, 2, 23.0, m));
  return s;
}

inline mission::MissionPlan plan_for(const mission::Scenario& s) {
  auto p = mission::MissionPlan::for_scenario(s);
  p.speed_mps = 4.0;
  return p;
}

}  // namespace uavsense::presets
