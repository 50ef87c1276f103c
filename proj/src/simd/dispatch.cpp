#include <atomic>
#include <cstdlib>
#include <string>

#include "ispw/errors.hpp"
#include "ispw/simd/kernels.hpp"

namespace ispw::simd {

#if defined(ISPW_HAVE_AVX2)
namespace avx2 {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
             bool accumulate);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
}  // namespace avx2
#endif

namespace {

bool cpu_has_avx2() {
#if defined(ISPW_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  // ISPW_SIMD=scalar forces the reference path for a whole process.
  if (const char* env = std::getenv("ISPW_SIMD"); env != nullptr && std::string(env) == "scalar") {
    return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

template <class T>
void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    }
    for (std::size_t p = 0; p < k; ++p) scalar::axpy(a[i * k + p], b + p * n, ci, n);
  }
}

template <class T, class DotFn>
void gemm_nt_with(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate,
                  DotFn dot_fn) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const T s = dot_fn(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

}  // namespace

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

void force_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw ParameterError("SIMD variant " + std::string(isa_name(isa)) + " is not available on this CPU/build");
  }
  current().store(isa);
}

void reset_isa() { current().store(detect()); }

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

#if defined(ISPW_HAVE_AVX2)
#define ISPW_DISPATCH(call_avx2, call_scalar) \
  if (active_isa() == Isa::Avx2) {            \
    return call_avx2;                         \
  }                                           \
  return call_scalar;
#else
#define ISPW_DISPATCH(call_avx2, call_scalar) return call_scalar;
#endif

void axpy(float a, std::span<const float> x, std::span<float> y) {
  ISPW_DISPATCH(avx2::axpy(a, x.data(), y.data(), x.size()), scalar::axpy(a, x.data(), y.data(), x.size()))
}
void axpy(double a, std::span<const double> x, std::span<double> y) {
  ISPW_DISPATCH(avx2::axpy(a, x.data(), y.data(), x.size()), scalar::axpy(a, x.data(), y.data(), x.size()))
}
float dot(std::span<const float> x, std::span<const float> y) {
  ISPW_DISPATCH(avx2::dot(x.data(), y.data(), x.size()), scalar::dot(x.data(), y.data(), x.size()))
}
double dot(std::span<const double> x, std::span<const double> y) {
  ISPW_DISPATCH(avx2::dot(x.data(), y.data(), x.size()), scalar::dot(x.data(), y.data(), x.size()))
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  ISPW_DISPATCH(avx2::gemm_nn(m, n, k, a, b, c, accumulate), gemm_nn_scalar(m, n, k, a, b, c, accumulate))
}
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  ISPW_DISPATCH(avx2::gemm_nn(m, n, k, a, b, c, accumulate), gemm_nn_scalar(m, n, k, a, b, c, accumulate))
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  auto sdot = [](const float* x, const float* y, std::size_t len) { return scalar::dot(x, y, len); };
#if defined(ISPW_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    auto vdot = [](const float* x, const float* y, std::size_t len) { return avx2::dot(x, y, len); };
    return gemm_nt_with(m, n, k, a, b, c, accumulate, vdot);
  }
#endif
  gemm_nt_with(m, n, k, a, b, c, accumulate, sdot);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  auto sdot = [](const double* x, const double* y, std::size_t len) { return scalar::dot(x, y, len); };
#if defined(ISPW_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    auto vdot = [](const double* x, const double* y, std::size_t len) { return avx2::dot(x, y, len); };
    return gemm_nt_with(m, n, k, a, b, c, accumulate, vdot);
  }
#endif
  gemm_nt_with(m, n, k, a, b, c, accumulate, sdot);
}

}  // namespace ispw::simd
