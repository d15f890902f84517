#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace uavsense {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double c_light = 299792458.0;

// Bad or inconsistent configuration (allocation overflow, unsupported length...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Impossible geometry: coincident positions, degenerate polygons.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Malformed files.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 unit() const {
    double n = norm();
    return n > 0 ? *this * (1.0 / n) : Vec3{};
  }
  bool operator==(const Vec3&) const = default;
};

struct Vec2 {
  double x = 0, y = 0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 xy(const Vec3& v) { return {v.x, v.y}; }

// Complex baseband stream. Amplitudes are sqrt(mW) once a channel has been
// applied, dimensionless (unit symbol energy) straight out of the waveform module.
struct IqCapture {
  cvec samples;
  double sample_rate_hz = 0;
  double t0_s = 0;
  int antenna_id = 0;
  double center_freq_hz = 0;
};

inline double db10(double lin) { return 10.0 * std::log10(lin); }
inline double from_db10(double db) { return std::pow(10.0, db / 10.0); }

inline double energy(const cplx* p, std::size_t n) {
  double e = 0;
  for (std::size_t i = 0; i < n; ++i) e += std::norm(p[i]);
  return e;
}
inline double energy(const cvec& v) { return energy(v.data(), v.size()); }

}  // namespace uavsense
