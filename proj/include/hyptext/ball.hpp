#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace hyptext::ball {

/// Realized norms are kept at or below 1 - kBallEpsilon.
inline constexpr double kBallEpsilon = 1e-5;
/// Squared Euclidean separation below which a pair is treated as coincident
/// for gradient purposes.
inline constexpr double kSeparationGuard = 1e-9;
/// Raw direction vectors shorter than this cannot be normalized.
inline constexpr double kDirectionGuard = 1e-12;

enum class Metric { hyperbolic, euclidean };

std::string_view to_string(Metric m) noexcept;
/// Parses "hyperbolic" / "euclidean"; throws InvalidInput otherwise.
Metric parse_metric(std::string_view name);

/// A point of the open unit ball with norm at most 1 - kBallEpsilon.
class BallPoint {
public:
    BallPoint() = default;

    /// Validates finiteness, dimension >= 2 and norm < 1. Points in
    /// [1 - kBallEpsilon, 1) are pulled back onto the guard radius.
    static BallPoint from_coords(std::vector<double> coords);

    /// The origin of dimension `dim`.
    static BallPoint origin(std::size_t dim);

    std::span<const double> coords() const noexcept { return coords_; }
    std::size_t dim() const noexcept { return coords_.size(); }
    double operator[](std::size_t i) const noexcept { return coords_[i]; }
    double norm() const noexcept;

private:
    explicit BallPoint(std::vector<double> c) : coords_(std::move(c)) {}
    std::vector<double> coords_;
};

/// Pre-normalization direction and pre-sigmoid norm of an embedding.
struct RawEmbedding {
    std::vector<double> dir_raw;
    double norm_raw = 0.0;
};

double sigmoid(double x) noexcept;

// ---- Distances -------------------------------------------------------------

/// Hyperbolic distance in the Poincare ball (curvature -1).
double poincare_distance(std::span<const double> u, std::span<const double> v);
double poincare_distance(const BallPoint& u, const BallPoint& v);

/// Euclidean distance, used as the baseline metric.
double euclidean_distance(std::span<const double> u, std::span<const double> v);

double distance(Metric m, std::span<const double> u, std::span<const double> v);

/// Distance from the origin, 2 artanh(|u|).
double hyperbolic_norm(std::span<const double> u);

/// Cosine distance 1 - cos(u, v). Throws InvalidInput on a zero-norm input.
double cosine_distance(std::span<const double> u, std::span<const double> v);
double cosine_distance(const BallPoint& u, const BallPoint& v);

/// Gradient of a distance, in factored form:
///   dd/du =  diff * (u - v) + self_u * u
///   dd/dv = -diff * (u - v) + self_v * v
struct DistancePartials {
    double distance = 0.0;
    double diff = 0.0;
    double self_u = 0.0;
    double self_v = 0.0;
    // Squared separation below kSeparationGuard; coefficients are zero.
    bool degenerate = false;
};

DistancePartials poincare_partials(std::span<const double> u, std::span<const double> v);
DistancePartials euclidean_partials(std::span<const double> u, std::span<const double> v);
DistancePartials distance_partials(Metric m, std::span<const double> u, std::span<const double> v);

/// grad_u += upstream * dd/du, grad_v += upstream * dd/dv.
void accumulate_partials(const DistancePartials& p, double upstream, std::span<const double> u,
                         std::span<const double> v, std::span<double> grad_u, std::span<double> grad_v);

struct DistanceGradient {
    std::vector<double> grad_u;
    std::vector<double> grad_v;
};

/// Analytic gradient of poincare_distance. Throws DegeneratePair when the
/// points are closer than the separation guard.
DistanceGradient poincare_distance_grad(const BallPoint& u, const BallPoint& v);
DistanceGradient poincare_distance_grad(std::span<const double> u, std::span<const double> v);

// ---- Re-parameterization ---------------------------------------------------

/// Result of mapping raw parameters onto the ball, kept for the backward pass.
struct ReparamCache {
    double dir_length = 0.0; // |dir_raw|
    double norm = 0.0;       // realized norm p
    bool clamped = false;    // p hit the 1 - kBallEpsilon guard
};

/// out = sigmoid(norm_raw) * dir_raw / |dir_raw|. Throws DegenerateDirection
/// when |dir_raw| < kDirectionGuard.
ReparamCache reparam_into(std::span<const double> dir_raw, double norm_raw, std::span<double> out);

BallPoint reparam(const RawEmbedding& raw);

/// Vector-Jacobian product of reparam. Accumulates into grad_dir/grad_norm.
void reparam_backward(std::span<const double> dir_raw, double norm_raw, const ReparamCache& cache,
                      std::span<const double> upstream, std::span<double> grad_dir, double& grad_norm);

RawEmbedding reparam_grad(const RawEmbedding& raw, std::span<const double> upstream);

/// Draws a fresh uniformly random unit direction (used when a raw direction
/// collapses during training).
void random_unit_direction(std::span<double> out, std::mt19937_64& rng);

} // namespace hyptext::ball
