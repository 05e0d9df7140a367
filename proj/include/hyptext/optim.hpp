#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hyptext::optim {

struct AdamHyper {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    /// Throws InvalidInput unless lr > 0, betas in (0,1), eps > 0.
    void validate() const;
};

/// Dense Adam moments for one flat parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    AdamState() = default;
    explicit AdamState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}
};

/// A named gradient buffer; the name is reported when the buffer holds a
/// non-finite value.
struct GradBlock {
    std::string name;
    std::span<double> grad;
};

/// Global L2 norm over all blocks. Throws NonFiniteGradient naming the first
/// offending block.
double global_norm(std::span<const GradBlock> blocks);

/// Rescales every block by max_norm / g when the global norm g exceeds
/// max_norm. Returns g (before clipping).
double clip_by_global_norm(std::span<const GradBlock> blocks, double max_norm);

/// One bias-corrected Adam update, in place; state.t advances by one.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamHyper& hyper);

/// Adam over the rows of a table where only some rows receive gradient on a
/// given step. Each row keeps its own step counter, so bias correction is
/// applied with the number of updates that row has actually seen.
class SparseRowAdam {
public:
    SparseRowAdam() = default;
    SparseRowAdam(std::size_t rows, std::size_t width);

    void step_row(std::size_t row, std::span<double> params, std::span<const double> grad, const AdamHyper& hyper);

    std::size_t rows() const noexcept { return steps_.size(); }
    std::size_t width() const noexcept { return width_; }
    std::int64_t row_steps(std::size_t row) const { return steps_.at(row); }

private:
    std::size_t width_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
    std::vector<std::int64_t> steps_;
};

/// Exponential decay lr0 * 2^(-step / half_life).
double halving_decay(double lr0, std::int64_t step, double half_life);

/// Compares `analytic` against central finite differences of f at x with
/// step 1e-6 * max(1, |x_i|). Returns the worst coordinate's relative error,
/// |a - n| / max(|a|, |n|, 1e-8).
struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

GradientCheck check_gradient(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                             std::span<const double> analytic);

} // namespace hyptext::optim
