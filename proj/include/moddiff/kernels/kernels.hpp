#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops behind the solvers: scalar reference kernels plus
// AVX2 variants selected once at startup from CPU capabilities. Both variants
// of every kernel compute the same quantity; they may differ in summation
// order, so cross-backend comparisons are tolerance-based, not bitwise.
// Within one process the selected backend is fixed, which keeps repeated runs
// bit-identical.
namespace moddiff::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend b);

// Test hook. Returns false (and leaves the backend unchanged) if unsupported
// on this CPU.
bool force_backend(Backend b);

std::string_view backend_name(Backend b);

// Reductions.
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
double sumabs(const double* x, std::size_t n);

// Elementwise updates.
void axpy(double a, const double* x, double* y, std::size_t n); // y += a*x
void scale(double a, double* x, std::size_t n);                 // x *= a
void sub(const double* x, const double* y, double* r, std::size_t n); // r = x - y

// Row-major matrix products, all accumulate into C.
// nn: C(n,m) += A(n,k) * B(k,m)
// tn: C(k,m) += A(n,k)^T * B(n,m)
// nt: C(n,m) += A(n,k) * B(m,k)^T
void matmul_nn(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
               std::size_t m);
void matmul_tn(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
               std::size_t m);
void matmul_nt(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
               std::size_t m);

} // namespace moddiff::kernels
