#include "hyptext/optim.hpp"

#include "hyptext/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hyptext::optim {

void AdamHyper::validate() const {
    if (!(lr > 0.0)) throw InvalidInput("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw InvalidInput("Adam betas must lie in (0, 1)");
    if (!(eps > 0.0)) throw InvalidInput("Adam eps must be positive");
}

double global_norm(std::span<const GradBlock> blocks) {
    double sq = 0.0;
    for (const auto& b : blocks) {
        for (double g : b.grad) {
            if (!std::isfinite(g)) throw NonFiniteGradient(b.name);
            sq += g * g;
        }
    }
    return std::sqrt(sq);
}

double clip_by_global_norm(std::span<const GradBlock> blocks, double max_norm) {
    if (!(max_norm > 0.0)) throw InvalidInput("clip norm must be positive");
    const double g = global_norm(blocks);
    if (g > max_norm) {
        const double s = max_norm / g;
        for (const auto& b : blocks) {
            for (double& x : b.grad) x *= s;
        }
    }
    return g;
}

namespace {

inline void adam_update(double* p, const double* g, double* m, double* v, std::size_t n, std::int64_t t,
                        const AdamHyper& h) {
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
}

} // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw InvalidInput("adam_step: parameter, gradient and state shapes differ");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) throw NonFiniteGradient("params");
    }
    state.t += 1;
    adam_update(params.data(), grads.data(), state.m.data(), state.v.data(), params.size(), state.t, hyper);
}

SparseRowAdam::SparseRowAdam(std::size_t rows, std::size_t width)
    : width_(width), m_(rows * width, 0.0), v_(rows * width, 0.0), steps_(rows, 0) {}

void SparseRowAdam::step_row(std::size_t row, std::span<double> params, std::span<const double> grad,
                             const AdamHyper& hyper) {
    if (row >= steps_.size()) throw OutOfRange("SparseRowAdam: row out of range");
    if (params.size() != width_ || grad.size() != width_) throw InvalidInput("SparseRowAdam: row width mismatch");
    const std::int64_t t = ++steps_[row];
    adam_update(params.data(), grad.data(), m_.data() + row * width_, v_.data() + row * width_, width_, t, hyper);
}

double halving_decay(double lr0, std::int64_t step, double half_life) {
    return lr0 * std::exp2(-static_cast<double>(step) / half_life);
}

GradientCheck check_gradient(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                             std::span<const double> analytic) {
    if (analytic.size() != x.size()) throw InvalidInput("check_gradient: analytic gradient has the wrong size");
    std::vector<double> probe(x.begin(), x.end());
    GradientCheck out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / denom;
        if (i == 0 || rel > out.max_rel_error) {
            out.max_rel_error = rel;
            out.worst_index = i;
            out.analytic_at_worst = a;
            out.numeric_at_worst = numeric;
        }
    }
    return out;
}

} // namespace hyptext::optim
