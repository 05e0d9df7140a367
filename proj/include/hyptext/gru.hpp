#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hyptext::gru {

inline constexpr double kLayerNormEps = 1e-5;

/// Read-only view of one GRU direction. Gate blocks are stacked in the order
/// update (z), reset (r), candidate (h):
///   w    : 3*hidden x input   (row-major)
///   u    : 3*hidden x hidden
///   b    : 3*hidden
///   gain : 3*hidden, or empty when layer normalization is off
struct Weights {
    std::span<const double> w;
    std::span<const double> u;
    std::span<const double> b;
    std::span<const double> gain;
    std::size_t input = 0;
    std::size_t hidden = 0;

    bool layer_norm() const noexcept { return !gain.empty(); }
};

/// Gradient buffers with the same layout as Weights.
struct Grads {
    std::span<double> w;
    std::span<double> u;
    std::span<double> b;
    std::span<double> gain;
};

/// Activations of one step, kept for the backward pass.
struct StepCache {
    std::vector<double> x;
    std::vector<double> h_prev;
    std::vector<double> z;
    std::vector<double> r;
    std::vector<double> cand;  // tanh output
    std::vector<double> rh;    // r * h_prev
    std::vector<double> normed;   // 3*hidden layer-normalized pre-activations
    std::vector<double> inv_std;  // 3 entries, one per gate
    std::vector<double> h;
};

/// z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
/// c = tanh(Wh x + Uh (r*h) + bh), h' = (1 - z) * h + z * c.
/// With layer normalization each gate's pre-activation (W x + U h) is
/// normalized, scaled by its gain, then shifted by b.
void step(const Weights& wts, std::span<const double> x, std::span<const double> h_prev, StepCache& cache);

std::vector<double> step(const Weights& wts, std::span<const double> x, std::span<const double> h_prev);

/// Back-propagates dh (gradient on the step output). Accumulates parameter
/// gradients into `grads`, adds to dx, and overwrites dh_prev.
void step_backward(const Weights& wts, const StepCache& cache, std::span<const double> dh, Grads& grads,
                   std::span<double> dx, std::span<double> dh_prev);

} // namespace hyptext::gru
