#include "hyptext/kernels.hpp"

#include <immintrin.h>

namespace hyptext::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double squared_norm_avx2(const double* a, std::size_t n) { return dot_avx2(a, a, n); }

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

PairStats pair_stats_avx2(const double* a, const double* b, std::size_t n) {
    __m256d uu = _mm256_setzero_pd();
    __m256d vv = _mm256_setzero_pd();
    __m256d dd = _mm256_setzero_pd();
    __m256d uv = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(a + i);
        const __m256d y = _mm256_loadu_pd(b + i);
        const __m256d d = _mm256_sub_pd(x, y);
        uu = _mm256_fmadd_pd(x, x, uu);
        vv = _mm256_fmadd_pd(y, y, vv);
        dd = _mm256_fmadd_pd(d, d, dd);
        uv = _mm256_fmadd_pd(x, y, uv);
    }
    PairStats st{hsum(uu), hsum(vv), hsum(dd), hsum(uv)};
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        st.u_sq += a[i] * a[i];
        st.v_sq += b[i] * b[i];
        st.diff_sq += d * d;
        st.dot += a[i] * b[i];
    }
    return st;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double alpha, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(a, _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] *= alpha;
}

void lincomb_avx2(double a, const double* x, double b, const double* z, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(vb, _mm256_loadu_pd(z + i));
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), t));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * z[i];
}

} // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{
    "avx2",          dot_avx2,  squared_norm_avx2, squared_distance_avx2,
    pair_stats_avx2, axpy_avx2, scale_avx2,        lincomb_avx2,
};

} // namespace hyptext::kernels
