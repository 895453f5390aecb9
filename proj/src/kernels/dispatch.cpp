#include "moddiff/kernels/kernels.hpp"

#include <atomic>

#include "kernels_internal.hpp"

namespace moddiff::kernels {

namespace {

using detail::KernelTable;

bool cpu_has_avx2() {
#if defined(MODDIFF_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Backend b) {
#if defined(MODDIFF_HAVE_AVX2)
    if (b == Backend::avx2) return &detail::avx2_table();
#endif
    (void)b;
    return &detail::scalar_table();
}

struct Dispatch {
    std::atomic<const KernelTable*> table;
    std::atomic<Backend> backend;
    Dispatch() {
        Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
        backend.store(b);
        table.store(table_for(b));
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

inline const KernelTable& tab() { return *dispatch().table.load(std::memory_order_relaxed); }

} // namespace

Backend active_backend() { return dispatch().backend.load(); }

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
    return cpu_has_avx2();
}

bool force_backend(Backend b) {
    if (!backend_available(b)) return false;
    dispatch().backend.store(b);
    dispatch().table.store(table_for(b));
    return true;
}

std::string_view backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(const double* x, const double* y, std::size_t n) { return tab().dot(x, y, n); }
double sum(const double* x, std::size_t n) { return tab().sum(x, n); }
double sumsq(const double* x, std::size_t n) { return tab().sumsq(x, n); }
double sumabs(const double* x, std::size_t n) { return tab().sumabs(x, n); }

void axpy(double a, const double* x, double* y, std::size_t n) { tab().axpy(a, x, y, n); }
void scale(double a, double* x, std::size_t n) { tab().scale(a, x, n); }
void sub(const double* x, const double* y, double* r, std::size_t n) { tab().sub(x, y, r, n); }

void matmul_nn(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
               std::size_t m) {
    tab().matmul_nn(A, B, C, n, k, m);
}
void matmul_tn(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
               std::size_t m) {
    tab().matmul_tn(A, B, C, n, k, m);
}
void matmul_nt(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
               std::size_t m) {
    tab().matmul_nt(A, B, C, n, k, m);
}

} // namespace moddiff::kernels
