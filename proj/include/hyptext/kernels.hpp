#pragma once

#include <cstddef>
#include <string_view>

namespace hyptext::kernels {

/// Squared norms and squared difference of a pair, computed in one pass.
struct PairStats {
    double u_sq = 0.0;
    double v_sq = 0.0;
    double diff_sq = 0.0;
    double dot = 0.0;
};

/// Table of dense double-precision inner loops.
///
/// Every variant implements the same contract; the scalar table is the
/// reference and the SIMD tables are checked against it in the test suite.
/// Results may differ from the scalar reference only by summation order.
struct KernelTable {
    std::string_view name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_norm)(const double* a, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    PairStats (*pair_stats)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y = alpha * y
    void (*scale)(double alpha, double* y, std::size_t n);
    // y = a * x + b * z  (element-wise, out may alias none of the inputs)
    void (*lincomb)(double a, const double* x, double b, const double* z, double* out, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// AVX2+FMA variant, or nullptr when not compiled in or unsupported by the CPU.
const KernelTable* avx2_table() noexcept;

/// The table used by the library. Picked once at first use: AVX2 when the
/// CPU supports it, scalar otherwise. `HYPTEXT_KERNELS=scalar` in the
/// environment forces the reference variant.
const KernelTable& active() noexcept;

/// Overrides the active table (tests and benchmarking). Not thread-safe with
/// respect to concurrent kernel calls.
void set_active(const KernelTable& table) noexcept;

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline double squared_norm(const double* a, std::size_t n) { return active().squared_norm(a, n); }
inline double squared_distance(const double* a, const double* b, std::size_t n) {
    return active().squared_distance(a, b, n);
}
inline PairStats pair_stats(const double* a, const double* b, std::size_t n) { return active().pair_stats(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
inline void scale(double alpha, double* y, std::size_t n) { active().scale(alpha, y, n); }
inline void lincomb(double a, const double* x, double b, const double* z, double* out, std::size_t n) {
    active().lincomb(a, x, b, z, out, n);
}

} // namespace hyptext::kernels
