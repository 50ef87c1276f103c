// Register-blocked GEMM micro-kernels; compiled with -mavx2 -mfma.
#include <immintrin.h>

#include <cstddef>

namespace ispw::simd::avx2 {

// C[m x n] (+)= A[m x k] B[k x n]. 4 rows x 16 columns per register tile.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const float* a0 = a + (i + 0) * k;
    const float* a1 = a + (i + 1) * k;
    const float* a2 = a + (i + 2) * k;
    const float* a3 = a + (i + 3) * k;
    float* c0 = c + (i + 0) * n;
    float* c1 = c + (i + 1) * n;
    float* c2 = c + (i + 2) * n;
    float* c3 = c + (i + 3) * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256 r00 = _mm256_setzero_ps(), r01 = _mm256_setzero_ps();
      __m256 r10 = _mm256_setzero_ps(), r11 = _mm256_setzero_ps();
      __m256 r20 = _mm256_setzero_ps(), r21 = _mm256_setzero_ps();
      __m256 r30 = _mm256_setzero_ps(), r31 = _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * n + j);
        const __m256 b1 = _mm256_loadu_ps(b + p * n + j + 8);
        __m256 s = _mm256_broadcast_ss(a0 + p);
        r00 = _mm256_fmadd_ps(s, b0, r00);
        r01 = _mm256_fmadd_ps(s, b1, r01);
        s = _mm256_broadcast_ss(a1 + p);
        r10 = _mm256_fmadd_ps(s, b0, r10);
        r11 = _mm256_fmadd_ps(s, b1, r11);
        s = _mm256_broadcast_ss(a2 + p);
        r20 = _mm256_fmadd_ps(s, b0, r20);
        r21 = _mm256_fmadd_ps(s, b1, r21);
        s = _mm256_broadcast_ss(a3 + p);
        r30 = _mm256_fmadd_ps(s, b0, r30);
        r31 = _mm256_fmadd_ps(s, b1, r31);
      }
      if (accumulate) {
        r00 = _mm256_add_ps(r00, _mm256_loadu_ps(c0 + j));
        r01 = _mm256_add_ps(r01, _mm256_loadu_ps(c0 + j + 8));
        r10 = _mm256_add_ps(r10, _mm256_loadu_ps(c1 + j));
        r11 = _mm256_add_ps(r11, _mm256_loadu_ps(c1 + j + 8));
        r20 = _mm256_add_ps(r20, _mm256_loadu_ps(c2 + j));
        r21 = _mm256_add_ps(r21, _mm256_loadu_ps(c2 + j + 8));
        r30 = _mm256_add_ps(r30, _mm256_loadu_ps(c3 + j));
        r31 = _mm256_add_ps(r31, _mm256_loadu_ps(c3 + j + 8));
      }
      _mm256_storeu_ps(c0 + j, r00);
      _mm256_storeu_ps(c0 + j + 8, r01);
      _mm256_storeu_ps(c1 + j, r10);
      _mm256_storeu_ps(c1 + j + 8, r11);
      _mm256_storeu_ps(c2 + j, r20);
      _mm256_storeu_ps(c2 + j + 8, r21);
      _mm256_storeu_ps(c3 + j, r30);
      _mm256_storeu_ps(c3 + j + 8, r31);
    }
    for (; j < n; ++j) {
      float s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const float bv = b[p * n + j];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c0[j] = accumulate ? c0[j] + s0 : s0;
      c1[j] = accumulate ? c1[j] + s1 : s1;
      c2[j] = accumulate ? c2[j] + s2 : s2;
      c3[j] = accumulate ? c3[j] + s3 : s3;
    }
  }
  for (; i < m; ++i) {
    const float* ai = a + i * k;
    float* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 r = _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p) {
        r = _mm256_fmadd_ps(_mm256_broadcast_ss(ai + p), _mm256_loadu_ps(b + p * n + j), r);
      }
      if (accumulate) r = _mm256_add_ps(r, _mm256_loadu_ps(ci + j));
      _mm256_storeu_ps(ci + j, r);
    }
    for (; j < n; ++j) {
      float s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * b[p * n + j];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + (i + 0) * k;
    const double* a1 = a + (i + 1) * k;
    const double* a2 = a + (i + 2) * k;
    const double* a3 = a + (i + 3) * k;
    double* c0 = c + (i + 0) * n;
    double* c1 = c + (i + 1) * n;
    double* c2 = c + (i + 2) * n;
    double* c3 = c + (i + 3) * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d r00 = _mm256_setzero_pd(), r01 = _mm256_setzero_pd();
      __m256d r10 = _mm256_setzero_pd(), r11 = _mm256_setzero_pd();
      __m256d r20 = _mm256_setzero_pd(), r21 = _mm256_setzero_pd();
      __m256d r30 = _mm256_setzero_pd(), r31 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
        const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
        __m256d s = _mm256_broadcast_sd(a0 + p);
        r00 = _mm256_fmadd_pd(s, b0, r00);
        r01 = _mm256_fmadd_pd(s, b1, r01);
        s = _mm256_broadcast_sd(a1 + p);
        r10 = _mm256_fmadd_pd(s, b0, r10);
        r11 = _mm256_fmadd_pd(s, b1, r11);
        s = _mm256_broadcast_sd(a2 + p);
        r20 = _mm256_fmadd_pd(s, b0, r20);
        r21 = _mm256_fmadd_pd(s, b1, r21);
        s = _mm256_broadcast_sd(a3 + p);
        r30 = _mm256_fmadd_pd(s, b0, r30);
        r31 = _mm256_fmadd_pd(s, b1, r31);
      }
      if (accumulate) {
        r00 = _mm256_add_pd(r00, _mm256_loadu_pd(c0 + j));
        r01 = _mm256_add_pd(r01, _mm256_loadu_pd(c0 + j + 4));
        r10 = _mm256_add_pd(r10, _mm256_loadu_pd(c1 + j));
        r11 = _mm256_add_pd(r11, _mm256_loadu_pd(c1 + j + 4));
        r20 = _mm256_add_pd(r20, _mm256_loadu_pd(c2 + j));
        r21 = _mm256_add_pd(r21, _mm256_loadu_pd(c2 + j + 4));
        r30 = _mm256_add_pd(r30, _mm256_loadu_pd(c3 + j));
        r31 = _mm256_add_pd(r31, _mm256_loadu_pd(c3 + j + 4));
      }
      _mm256_storeu_pd(c0 + j, r00);
      _mm256_storeu_pd(c0 + j + 4, r01);
      _mm256_storeu_pd(c1 + j, r10);
      _mm256_storeu_pd(c1 + j + 4, r11);
      _mm256_storeu_pd(c2 + j, r20);
      _mm256_storeu_pd(c2 + j + 4, r21);
      _mm256_storeu_pd(c3 + j, r30);
      _mm256_storeu_pd(c3 + j + 4, r31);
    }
    for (; j < n; ++j) {
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const double bv = b[p * n + j];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c0[j] = accumulate ? c0[j] + s0 : s0;
      c1[j] = accumulate ? c1[j] + s1 : s1;
      c2[j] = accumulate ? c2[j] + s2 : s2;
      c3[j] = accumulate ? c3[j] + s3 : s3;
    }
  }
  for (; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d r = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        r = _mm256_fmadd_pd(_mm256_broadcast_sd(ai + p), _mm256_loadu_pd(b + p * n + j), r);
      }
      if (accumulate) r = _mm256_add_pd(r, _mm256_loadu_pd(ci + j));
      _mm256_storeu_pd(ci + j, r);
    }
    for (; j < n; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * b[p * n + j];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

}  // namespace ispw::simd::avx2
