#pragma once

#include <cstddef>

// Per-backend entry points. Only dispatch.cpp should include this.
namespace moddiff::kernels::detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sumsq)(const double*, std::size_t);
    double (*sumabs)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    void (*matmul_nn)(const double*, const double*, double*, std::size_t, std::size_t,
                      std::size_t);
    void (*matmul_tn)(const double*, const double*, double*, std::size_t, std::size_t,
                      std::size_t);
    void (*matmul_nt)(const double*, const double*, double*, std::size_t, std::size_t,
                      std::size_t);
};

const KernelTable& scalar_table();

#if defined(MODDIFF_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

} // namespace moddiff::kernels::detail
