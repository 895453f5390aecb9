#if defined(MODDIFF_HAVE_AVX2)

#include <cmath>
#include <immintrin.h>

#include "kernels_internal.hpp"

// AVX2+FMA variants. Four accumulator lanes per reduction to break the FMA
// dependency chain; scalar tail for the remainder.
namespace moddiff::kernels::detail {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

double sumabs_avx2(const double* x, std::size_t n) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffll));
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
        acc1 = _mm256_add_pd(acc1, _mm256_and_pd(mask, _mm256_loadu_pd(x + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_add_pd(acc0, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(
            y + i + 4,
            _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void sub_avx2(const double* x, const double* y, double* r, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(r + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) r[i] = x[i] - y[i];
}

// C(n,m) += A(n,k) B(k,m): broadcast A(i,p), FMA along rows of B.
void matmul_nn_avx2(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
                    std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = A + i * k;
        double* c = C + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(a[p]);
            const double* b = B + p * m;
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4)
                _mm256_storeu_pd(
                    c + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(b + j), _mm256_loadu_pd(c + j)));
            for (; j < m; ++j) c[j] += a[p] * b[j];
        }
    }
}

void matmul_tn_avx2(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
                    std::size_t m) {
    for (std::size_t t = 0; t < n; ++t) {
        const double* a = A + t * k;
        const double* b = B + t * m;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(a[p]);
            double* c = C + p * m;
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4)
                _mm256_storeu_pd(
                    c + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(b + j), _mm256_loadu_pd(c + j)));
            for (; j < m; ++j) c[j] += a[p] * b[j];
        }
    }
}

void matmul_nt_avx2(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
                    std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = A + i * k;
        double* c = C + i * m;
        for (std::size_t j = 0; j < m; ++j) c[j] += dot_avx2(a, B + j * k, k);
    }
}

} // namespace

const KernelTable& avx2_table() {
    static const KernelTable table{dot_avx2,   sum_avx2,       sumsq_avx2,    sumabs_avx2,
                                   axpy_avx2,  scale_avx2,     sub_avx2,      matmul_nn_avx2,
                                   matmul_tn_avx2, matmul_nt_avx2};
    return table;
}

} // namespace moddiff::kernels::detail

#endif // MODDIFF_HAVE_AVX2
