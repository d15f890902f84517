#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "uavsense/harness/config.hpp"

// Payload: interleaved little-endian float32 I/Q pairs (8 bytes per sample).
// Sidecar `<file>.json`: format, sample_rate_hz, center_freq_hz, t0_s,
// antenna_id, n_samples, schema_version.
namespace uavsense::harness {

struct IqMetadata {
  double sample_rate_hz = 0;
  double center_freq_hz = 0;
  double t0_s = 0;
  int antenna_id = 0;
  std::uint64_t n_samples = 0;
};

inline std::string sidecar_path(const std::string& iq_path) { return iq_path + ".json"; }

inline json to_json(const IqMetadata& m) {
  return {{"schema_version", schema_version}, {"format", "cf32_le"},        {"sample_rate_hz", m.sample_rate_hz},
          {"center_freq_hz", m.center_freq_hz}, {"t0_s", m.t0_s},          {"antenna_id", m.antenna_id},
          {"n_samples", m.n_samples}};
}

inline IqMetadata metadata_from_json(const json& j, const std::string& where) {
  IqMetadata m;
  ObjReader r(j, where);
  int ver = r.need<int>("schema_version");
  if (ver != schema_version) throw FormatError(where + ": unsupported schema_version");
  if (r.need<std::string>("format") != "cf32_le") throw FormatError(where + ": format must be cf32_le");
  m.sample_rate_hz = r.need<double>("sample_rate_hz");
  r.opt("center_freq_hz", m.center_freq_hz);
  r.opt("t0_s", m.t0_s);
  r.opt("antenna_id", m.antenna_id);
  m.n_samples = r.need<std::uint64_t>("n_samples");
  r.finish();
  if (!(m.sample_rate_hz > 0)) throw FormatError(where + ": sample_rate_hz must be positive");
  return m;
}

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  return v;
}

inline void pack(const cplx& c, char* out) {
  float f[2] = {static_cast<float>(c.real()), static_cast<float>(c.imag())};
  for (int k = 0; k < 2; ++k) {
    std::uint32_t u = to_le(std::bit_cast<std::uint32_t>(f[k]));
    std::memcpy(out + 4 * k, &u, 4);
  }
}

inline cplx unpack(const char* in) {
  float f[2];
  for (int k = 0; k < 2; ++k) {
    std::uint32_t u;
    std::memcpy(&u, in + 4 * k, 4);
    f[k] = std::bit_cast<float>(to_le(u));
  }
  return {f[0], f[1]};
}

}  // namespace detail

class IqWriter {
 public:
  IqWriter(std::string path, IqMetadata meta) : path_(std::move(path)), meta_(meta) {
    meta_.n_samples = 0;
    out_.open(path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw ConfigError("cannot write " + path_);
  }
  ~IqWriter() {
    try {
      close();
    } catch (...) {
    }
  }

  void write(const cplx* x, std::size_t n) {
    buf_.resize(8 * n);
    for (std::size_t i = 0; i < n; ++i) detail::pack(x[i], buf_.data() + 8 * i);
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out_) throw ConfigError("write failed: " + path_);
    meta_.n_samples += n;
  }
  void write(const cvec& x) { write(x.data(), x.size()); }

  void close() {
    if (!out_.is_open()) return;
    out_.close();
    std::ofstream side(sidecar_path(path_), std::ios::trunc);
    if (!side) throw ConfigError("cannot write " + sidecar_path(path_));
    side << to_json(meta_).dump(2) << "\n";
  }

 private:
  std::string path_;
  IqMetadata meta_;
  std::ofstream out_;
  std::vector<char> buf_;
};

// Reads a capture in blocks; never holds more than one block in memory.
class IqReader {
 public:
  explicit IqReader(std::string path) : path_(std::move(path)) {
    meta_ = metadata_from_json(read_json_file(sidecar_path(path_)), sidecar_path(path_));
    in_.open(path_, std::ios::binary);
    if (!in_) throw ConfigError("cannot open " + path_);
    bytes_ = std::filesystem::file_size(path_);
    if (bytes_ % 8 != 0)
      throw FormatError(path_ + ": truncated payload, " + std::to_string(bytes_ % 8) +
                        " trailing bytes at byte offset " + std::to_string(bytes_ - bytes_ % 8));
    if (bytes_ / 8 != meta_.n_samples)
      throw FormatError(path_ + ": payload holds " + std::to_string(bytes_ / 8) +
                        " samples, sidecar says " + std::to_string(meta_.n_samples) +
                        " (byte offset " + std::to_string(std::min<std::uint64_t>(bytes_, 8 * meta_.n_samples)) + ")");
  }

  const IqMetadata& metadata() const { return meta_; }
  std::uint64_t position() const { return pos_; }

  // Up to max_samples into out; returns the count, 0 at end of file.
  std::size_t read(cvec& out, std::size_t max_samples) {
    std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(max_samples, meta_.n_samples - pos_));
    buf_.resize(8 * n);
    in_.read(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (static_cast<std::size_t>(in_.gcount()) != buf_.size())
      throw FormatError(path_ + ": short read at byte offset " +
                        std::to_string(8 * pos_ + static_cast<std::uint64_t>(in_.gcount())));
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = detail::unpack(buf_.data() + 8 * i);
    pos_ += n;
    return n;
  }

 private:
  std::string path_;
  IqMetadata meta_;
  std::ifstream in_;
  std::uint64_t bytes_ = 0, pos_ = 0;
  std::vector<char> buf_;
};

inline void write_iq(const std::string& path, const IqCapture& cap) {
  IqMetadata m;
  m.sample_rate_hz = cap.sample_rate_hz;
  m.center_freq_hz = cap.center_freq_hz;
  m.t0_s = cap.t0_s;
  m.antenna_id = cap.antenna_id;
  IqWriter w(path, m);
  w.write(cap.samples);
  w.close();
}

inline IqCapture read_iq(const std::string& path) {
  IqReader r(path);
  IqCapture cap;
  cap.sample_rate_hz = r.metadata().sample_rate_hz;
  cap.center_freq_hz = r.metadata().center_freq_hz;
  cap.t0_s = r.metadata().t0_s;
  cap.antenna_id = r.metadata().antenna_id;
  r.read(cap.samples, static_cast<std::size_t>(r.metadata().n_samples));
  return cap;
}

// What the file will hold: samples rounded to float32.
inline cvec quantize_cf32(const cvec& x) {
  cvec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = {static_cast<float>(x[i].real()), static_cast<float>(x[i].imag())};
  return y;
}

}  // namespace uavsense::harness
