#pragma once

// Thin FFTW wrapper. Plans are created once per (size, direction) under a lock
// (the FFTW planner is not thread-safe) and executed with the new-array API,
// which is.

#include <fftw3.h>

#include <map>
#include <tuple>
#include <mutex>
#include <utility>

#include "uavsense/core/types.hpp"

namespace uavsense::fft {

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache c;
    return c;
  }
  // SIMD plans need both arrays at FFTW's preferred alignment; anything else
  // goes through an unaligned plan.
  fftw_plan get(int n, int sign, bool aligned) {
    std::lock_guard<std::mutex> lk(mu_);
    auto key = std::make_tuple(n, sign, aligned);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    auto* a = fftw_alloc_complex(n);
    auto* b = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(n, a, b, sign, FFTW_ESTIMATE | (aligned ? 0 : FFTW_UNALIGNED));
    fftw_free(a);
    fftw_free(b);
    plans_.emplace(key, p);
    return p;
  }
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

inline void run(const cplx* in, cplx* out, int n, int sign) {
  auto* i = reinterpret_cast<double*>(const_cast<cplx*>(in));
  auto* o = reinterpret_cast<double*>(out);
  const bool aligned = fftw_alignment_of(i) == 0 && fftw_alignment_of(o) == 0;
  fftw_plan p = PlanCache::instance().get(n, sign, aligned);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(i), reinterpret_cast<fftw_complex*>(o));
}

}  // namespace detail

// X[k] = sum_n x[n] e^{-j2pi kn/N}
inline cvec forward(const cplx* x, std::size_t n) {
  cvec out(n);
  if (n) detail::run(x, out.data(), static_cast<int>(n), FFTW_FORWARD);
  return out;
}
inline cvec forward(const cvec& x) { return forward(x.data(), x.size()); }

// x[n] = (1/N) sum_k X[k] e^{+j2pi kn/N}
inline cvec inverse(const cvec& x) {
  const std::size_t n = x.size();
  cvec out(n);
  if (!n) return out;
  detail::run(x.data(), out.data(), static_cast<int>(n), FFTW_BACKWARD);
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

// Zero-padded forward transform of x to length n (n >= x.size()).
inline cvec forward_padded(const cvec& x, std::size_t n) {
  cvec buf(n);
  std::copy(x.begin(), x.begin() + std::min(x.size(), n), buf.begin());
  return forward(buf);
}

}  // namespace uavsense::fft
