#include "hyptext/kernels.hpp"

namespace hyptext::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double squared_norm_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

PairStats pair_stats_scalar(const double* a, const double* b, std::size_t n) {
    PairStats st;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        st.u_sq += a[i] * a[i];
        st.v_sq += b[i] * b[i];
        st.diff_sq += d * d;
        st.dot += a[i] * b[i];
    }
    return st;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

void lincomb_scalar(double a, const double* x, double b, const double* z, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * z[i];
}

constexpr KernelTable kScalar{
    "scalar",          dot_scalar,  squared_norm_scalar, squared_distance_scalar,
    pair_stats_scalar, axpy_scalar, scale_scalar,        lincomb_scalar,
};

} // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

} // namespace hyptext::kernels
