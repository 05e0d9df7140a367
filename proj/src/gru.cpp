#include "hyptext/gru.hpp"

#include "hyptext/ball.hpp"
#include "hyptext/errors.hpp"
#include "hyptext/kernels.hpp"

#include <cmath>

namespace hyptext::gru {

namespace {

// out[i] = sum_j m[i*cols + j] * v[j]
void matvec(std::span<const double> m, std::size_t rows, std::size_t cols, std::span<const double> v, double* out) {
    for (std::size_t i = 0; i < rows; ++i) out[i] = kernels::dot(m.data() + i * cols, v.data(), cols);
}

// out[j] += sum_i m[i*cols + j] * g[i]
void matvec_t_acc(std::span<const double> m, std::size_t rows, std::size_t cols, const double* g, std::span<double> out) {
    for (std::size_t i = 0; i < rows; ++i) {
        if (g[i] != 0.0) kernels::axpy(g[i], m.data() + i * cols, out.data(), cols);
    }
}

// m[i*cols + j] += g[i] * v[j]
void outer_acc(std::span<double> m, std::size_t rows, std::size_t cols, const double* g, std::span<const double> v) {
    for (std::size_t i = 0; i < rows; ++i) {
        if (g[i] != 0.0) kernels::axpy(g[i], v.data(), m.data() + i * cols, cols);
    }
}

// Normalizes a[0..n) in place; returns 1/sqrt(var + eps).
double layer_norm_inplace(double* a, std::size_t n) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] -= mean;
        var += a[i] * a[i];
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t i = 0; i < n; ++i) a[i] *= inv;
    return inv;
}

// dn -> da for n = (a - mean) * inv_std
void layer_norm_backward(const double* normed, double inv_std, const double* dn, double* da, std::size_t n) {
    double mean_dn = 0.0;
    double mean_dn_n = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_dn += dn[i];
        mean_dn_n += dn[i] * normed[i];
    }
    mean_dn /= static_cast<double>(n);
    mean_dn_n /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) da[i] = inv_std * (dn[i] - mean_dn - normed[i] * mean_dn_n);
}

void check_shapes(const Weights& wts, std::size_t x, std::size_t h) {
    const std::size_t g = 3 * wts.hidden;
    if (x != wts.input || h != wts.hidden || wts.w.size() != g * wts.input || wts.u.size() != g * wts.hidden ||
        wts.b.size() != g || (!wts.gain.empty() && wts.gain.size() != g)) {
        throw InvalidInput("GRU shape mismatch");
    }
}

} // namespace

void step(const Weights& wts, std::span<const double> x, std::span<const double> h_prev, StepCache& c) {
    check_shapes(wts, x.size(), h_prev.size());
    const std::size_t n = wts.hidden;
    const std::size_t in = wts.input;
    const bool ln = wts.layer_norm();
    c.x.assign(x.begin(), x.end());
    c.h_prev.assign(h_prev.begin(), h_prev.end());
    c.z.resize(n);
    c.r.resize(n);
    c.cand.resize(n);
    c.rh.resize(n);
    c.h.resize(n);
    c.normed.assign(3 * n, 0.0);
    c.inv_std.assign(3, 1.0);

    std::vector<double> tmp(n);
    // pre-activation of gate g (0=z, 1=r, 2=h) given the recurrent input
    auto gate = [&](std::size_t g, std::span<const double> rec, std::vector<double>& out) {
        double* a = c.normed.data() + g * n;
        matvec(wts.w.subspan(g * n * in, n * in), n, in, x, a);
        matvec(wts.u.subspan(g * n * n, n * n), n, n, rec, tmp.data());
        for (std::size_t i = 0; i < n; ++i) a[i] += tmp[i];
        if (ln) c.inv_std[g] = layer_norm_inplace(a, n);
        for (std::size_t i = 0; i < n; ++i) out[i] = (ln ? wts.gain[g * n + i] * a[i] : a[i]) + wts.b[g * n + i];
    };

    gate(0, h_prev, c.z);
    for (double& v : c.z) v = ball::sigmoid(v);
    gate(1, h_prev, c.r);
    for (double& v : c.r) v = ball::sigmoid(v);
    for (std::size_t i = 0; i < n; ++i) c.rh[i] = c.r[i] * h_prev[i];
    gate(2, c.rh, c.cand);
    for (double& v : c.cand) v = std::tanh(v);
    for (std::size_t i = 0; i < n; ++i) c.h[i] = (1.0 - c.z[i]) * h_prev[i] + c.z[i] * c.cand[i];
}

std::vector<double> step(const Weights& wts, std::span<const double> x, std::span<const double> h_prev) {
    StepCache c;
    step(wts, x, h_prev, c);
    return c.h;
}

void step_backward(const Weights& wts, const StepCache& c, std::span<const double> dh, Grads& grads,
                   std::span<double> dx, std::span<double> dh_prev) {
    const std::size_t n = wts.hidden;
    const std::size_t in = wts.input;
    const bool ln = wts.layer_norm();

    std::vector<double> dpre(n);  // gradient on the gate's post-norm pre-activation
    std::vector<double> da(n);    // gradient on W x + U rec
    std::vector<double> d_rh(n, 0.0);
    std::vector<double> dr(n);

    for (std::size_t i = 0; i < n; ++i) dh_prev[i] = dh[i] * (1.0 - c.z[i]);

    // Shared tail for gate g: bias/gain grads, layer norm, then W and U.
    auto gate_backward = [&](std::size_t g, std::span<const double> rec, std::span<double> d_rec) {
        const double* normed = c.normed.data() + g * n;
        for (std::size_t i = 0; i < n; ++i) grads.b[g * n + i] += dpre[i];
        if (ln) {
            std::vector<double> dn(n);
            for (std::size_t i = 0; i < n; ++i) {
                grads.gain[g * n + i] += dpre[i] * normed[i];
                dn[i] = dpre[i] * wts.gain[g * n + i];
            }
            layer_norm_backward(normed, c.inv_std[g], dn.data(), da.data(), n);
        } else {
            da = dpre;
        }
        outer_acc(grads.w.subspan(g * n * in, n * in), n, in, da.data(), c.x);
        matvec_t_acc(wts.w.subspan(g * n * in, n * in), n, in, da.data(), dx);
        outer_acc(grads.u.subspan(g * n * n, n * n), n, n, da.data(), rec);
        matvec_t_acc(wts.u.subspan(g * n * n, n * n), n, n, da.data(), d_rec);
    };

    // candidate
    for (std::size_t i = 0; i < n; ++i) dpre[i] = dh[i] * c.z[i] * (1.0 - c.cand[i] * c.cand[i]);
    gate_backward(2, c.rh, d_rh);
    for (std::size_t i = 0; i < n; ++i) {
        dr[i] = d_rh[i] * c.h_prev[i];
        dh_prev[i] += d_rh[i] * c.r[i];
    }
    // reset
    for (std::size_t i = 0; i < n; ++i) dpre[i] = dr[i] * c.r[i] * (1.0 - c.r[i]);
    gate_backward(1, c.h_prev, dh_prev);
    // update
    for (std::size_t i = 0; i < n; ++i) {
        const double dz = dh[i] * (c.cand[i] - c.h_prev[i]);
        dpre[i] = dz * c.z[i] * (1.0 - c.z[i]);
    }
    gate_backward(0, c.h_prev, dh_prev);
}

} // namespace hyptext::gru
