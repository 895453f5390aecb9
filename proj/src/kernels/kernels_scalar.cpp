#include <cmath>

#include "kernels_internal.hpp"

// Reference implementations. These define the semantics the AVX2 variants are
// equivalence-tested against.
namespace moddiff::kernels::detail {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double sumabs_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void sub_scalar(const double* x, const double* y, double* r, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) r[i] = x[i] - y[i];
}

void matmul_nn_scalar(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
                      std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = A + i * k;
        double* c = C + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[p];
            const double* b = B + p * m;
            for (std::size_t j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

void matmul_tn_scalar(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
                      std::size_t m) {
    for (std::size_t t = 0; t < n; ++t) {
        const double* a = A + t * k;
        const double* b = B + t * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[p];
            double* c = C + p * m;
            for (std::size_t j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

void matmul_nt_scalar(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
                      std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = A + i * k;
        double* c = C + i * m;
        for (std::size_t j = 0; j < m; ++j) c[j] += dot_scalar(a, B + j * k, k);
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{dot_scalar,   sum_scalar,       sumsq_scalar,
                                   sumabs_scalar, axpy_scalar,     scale_scalar,
                                   sub_scalar,   matmul_nn_scalar, matmul_tn_scalar,
                                   matmul_nt_scalar};
    return table;
}

} // namespace moddiff::kernels::detail
