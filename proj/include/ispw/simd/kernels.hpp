#pragma once

// Data-parallel inner loops shared by convolution, matmul and image filters.
//
// Every kernel has a portable scalar reference implementation and, on x86-64
// builds, an AVX2/FMA variant. The variant is chosen once at first use from
// the CPU's reported features; `force_isa` pins it for equivalence tests.
// Results within one ISA are bitwise deterministic; across ISAs they agree to
// rounding (FMA and lane-wise reduction order differ).

#include <cstddef>
#include <span>
#include <string_view>

namespace ispw::simd {

enum class Isa { Scalar, Avx2 };

/// ISA currently used by the dispatching entry points.
Isa active_isa();
/// True when the running CPU and the build both support `isa`.
bool isa_available(Isa isa);
/// Pin the dispatch to `isa`. Throws ParameterError if unavailable.
void force_isa(Isa isa);
/// Return to automatic selection.
void reset_isa();
std::string_view isa_name(Isa isa);

// y += a * x
void axpy(float a, std::span<const float> x, std::span<float> y);
void axpy(double a, std::span<const double> x, std::span<double> y);

float dot(std::span<const float> x, std::span<const float> y);
double dot(std::span<const double> x, std::span<const double> y);

/// C[m x n] (+)= A[m x k] * B[k x n], all row-major and densely packed.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
             bool accumulate);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

/// C[m x n] (+)= A[m x k] * B[n x k]^T.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
             bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

/// Raw per-ISA entry points, exposed for equivalence tests and benchmarks.
namespace scalar {
void axpy(float a, const float* x, float* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
}  // namespace scalar

#if defined(ISPW_HAVE_AVX2)
namespace avx2 {
void axpy(float a, const float* x, float* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
}  // namespace avx2
#endif

}  // namespace ispw::simd
