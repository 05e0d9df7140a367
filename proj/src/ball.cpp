#include "hyptext/ball.hpp"

#include "hyptext/errors.hpp"
#include "hyptext/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hyptext::ball {

namespace {

constexpr double kMaxNorm = 1.0 - kBallEpsilon;
constexpr double kMaxNormSq = kMaxNorm * kMaxNorm;

void require_same_dim(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw InvalidInput("dimension mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
}

void require_finite(const kernels::PairStats& st) {
    if (!std::isfinite(st.u_sq) || !std::isfinite(st.v_sq) || !std::isfinite(st.diff_sq)) {
        throw InvalidInput("non-finite coordinates in distance");
    }
}

// arcosh(1 + y) without the cancellation of acosh near 1.
double arcosh1p(double y) { return std::log1p(y + std::sqrt(y * (y + 2.0))); }

} // namespace

std::string_view to_string(Metric m) noexcept { return m == Metric::hyperbolic ? "hyperbolic" : "euclidean"; }

Metric parse_metric(std::string_view name) {
    if (name == "hyperbolic" || name == "poincare") return Metric::hyperbolic;
    if (name == "euclidean") return Metric::euclidean;
    throw InvalidInput("unknown metric '" + std::string(name) + "'");
}

BallPoint BallPoint::from_coords(std::vector<double> coords) {
    if (coords.size() < 2) throw InvalidInput("ball points need dimension >= 2");
    double sq = 0.0;
    for (double c : coords) {
        if (!std::isfinite(c)) throw InvalidInput("non-finite ball coordinate");
        sq += c * c;
    }
    if (sq >= 1.0) throw InvalidInput("point lies outside the open unit ball (norm " + std::to_string(std::sqrt(sq)) + ")");
    if (sq > kMaxNormSq) {
        const double s = kMaxNorm / std::sqrt(sq);
        for (double& c : coords) c *= s;
    }
    return BallPoint(std::move(coords));
}

BallPoint BallPoint::origin(std::size_t dim) {
    if (dim < 2) throw InvalidInput("ball points need dimension >= 2");
    return BallPoint(std::vector<double>(dim, 0.0));
}

double BallPoint::norm() const noexcept { return std::sqrt(kernels::squared_norm(coords_.data(), coords_.size())); }

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double poincare_distance(std::span<const double> u, std::span<const double> v) {
    require_same_dim(u, v);
    const auto st = kernels::pair_stats(u.data(), v.data(), u.size());
    require_finite(st);
    const double alpha = 1.0 - std::min(st.u_sq, kMaxNormSq);
    const double beta = 1.0 - std::min(st.v_sq, kMaxNormSq);
    const double y = std::max(0.0, 2.0 * st.diff_sq / (alpha * beta));
    return arcosh1p(y);
}

double poincare_distance(const BallPoint& u, const BallPoint& v) { return poincare_distance(u.coords(), v.coords()); }

double euclidean_distance(std::span<const double> u, std::span<const double> v) {
    require_same_dim(u, v);
    const double sq = kernels::squared_distance(u.data(), v.data(), u.size());
    if (!std::isfinite(sq)) throw InvalidInput("non-finite coordinates in distance");
    return std::sqrt(sq);
}

double distance(Metric m, std::span<const double> u, std::span<const double> v) {
    return m == Metric::hyperbolic ? poincare_distance(u, v) : euclidean_distance(u, v);
}

double hyperbolic_norm(std::span<const double> u) {
    const double r = std::min(std::sqrt(kernels::squared_norm(u.data(), u.size())), kMaxNorm);
    return 2.0 * std::atanh(r);
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    require_same_dim(u, v);
    const auto st = kernels::pair_stats(u.data(), v.data(), u.size());
    require_finite(st);
    if (st.u_sq == 0.0 || st.v_sq == 0.0) throw InvalidInput("cosine distance of a zero-norm point");
    const double c = st.dot / std::sqrt(st.u_sq * st.v_sq);
    return std::clamp(1.0 - c, 0.0, 2.0);
}

double cosine_distance(const BallPoint& u, const BallPoint& v) { return cosine_distance(u.coords(), v.coords()); }

DistancePartials poincare_partials(std::span<const double> u, std::span<const double> v) {
    require_same_dim(u, v);
    const auto st = kernels::pair_stats(u.data(), v.data(), u.size());
    require_finite(st);
    const bool u_clamped = st.u_sq > kMaxNormSq;
    const bool v_clamped = st.v_sq > kMaxNormSq;
    const double alpha = 1.0 - (u_clamped ? kMaxNormSq : st.u_sq);
    const double beta = 1.0 - (v_clamped ? kMaxNormSq : st.v_sq);
    const double y = std::max(0.0, 2.0 * st.diff_sq / (alpha * beta));

    DistancePartials p;
    p.distance = arcosh1p(y);
    if (st.diff_sq < kSeparationGuard) {
        p.degenerate = true;
        return p;
    }
    // d = arcosh(1 + y), y = 2|u-v|^2 / (alpha beta); dd/dy = 1 / sqrt(y (y + 2)).
    const double s = std::sqrt(y * (y + 2.0));
    const double ab = alpha * beta;
    p.diff = 4.0 / (ab * s);
    p.self_u = u_clamped ? 0.0 : 4.0 * st.diff_sq / (alpha * ab * s);
    p.self_v = v_clamped ? 0.0 : 4.0 * st.diff_sq / (beta * ab * s);
    return p;
}

DistancePartials euclidean_partials(std::span<const double> u, std::span<const double> v) {
    require_same_dim(u, v);
    const double sq = kernels::squared_distance(u.data(), v.data(), u.size());
    if (!std::isfinite(sq)) throw InvalidInput("non-finite coordinates in distance");
    DistancePartials p;
    p.distance = std::sqrt(sq);
    if (sq < kSeparationGuard) {
        p.degenerate = true;
        return p;
    }
    p.diff = 1.0 / p.distance;
    return p;
}

DistancePartials distance_partials(Metric m, std::span<const double> u, std::span<const double> v) {
    return m == Metric::hyperbolic ? poincare_partials(u, v) : euclidean_partials(u, v);
}

void accumulate_partials(const DistancePartials& p, double upstream, std::span<const double> u,
                         std::span<const double> v, std::span<double> grad_u, std::span<double> grad_v) {
    if (p.degenerate || upstream == 0.0) return;
    const std::size_t n = u.size();
    const double a = upstream * p.diff;
    const double bu = upstream * p.self_u;
    const double bv = upstream * p.self_v;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = u[i] - v[i];
        grad_u[i] += a * d + bu * u[i];
        grad_v[i] += -a * d + bv * v[i];
    }
}

DistanceGradient poincare_distance_grad(std::span<const double> u, std::span<const double> v) {
    const auto p = poincare_partials(u, v);
    if (p.degenerate) throw DegeneratePair("points closer than the separation guard; distance gradient is singular");
    DistanceGradient g{std::vector<double>(u.size(), 0.0), std::vector<double>(v.size(), 0.0)};
    accumulate_partials(p, 1.0, u, v, g.grad_u, g.grad_v);
    return g;
}

DistanceGradient poincare_distance_grad(const BallPoint& u, const BallPoint& v) {
    return poincare_distance_grad(u.coords(), v.coords());
}

ReparamCache reparam_into(std::span<const double> dir_raw, double norm_raw, std::span<double> out) {
    if (out.size() != dir_raw.size()) throw InvalidInput("reparam output dimension mismatch");
    if (!std::isfinite(norm_raw)) throw InvalidInput("non-finite norm parameter");
    const double len_sq = kernels::squared_norm(dir_raw.data(), dir_raw.size());
    if (!std::isfinite(len_sq)) throw InvalidInput("non-finite direction parameter");
    ReparamCache cache;
    cache.dir_length = std::sqrt(len_sq);
    if (cache.dir_length < kDirectionGuard) throw DegenerateDirection("raw direction vector is (numerically) zero");
    cache.norm = sigmoid(norm_raw);
    if (cache.norm > kMaxNorm) {
        cache.norm = kMaxNorm;
        cache.clamped = true;
    }
    const double s = cache.norm / cache.dir_length;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * dir_raw[i];
    return cache;
}

BallPoint reparam(const RawEmbedding& raw) {
    std::vector<double> out(raw.dir_raw.size());
    reparam_into(raw.dir_raw, raw.norm_raw, out);
    return BallPoint::from_coords(std::move(out));
}

void reparam_backward(std::span<const double> dir_raw, double norm_raw, const ReparamCache& cache,
                      std::span<const double> upstream, std::span<double> grad_dir, double& grad_norm) {
    // theta = p * w, w = dir_raw / |dir_raw|
    // dL/d dir_raw = (p / |dir_raw|) (g - w (w . g));  dL/d norm_raw = sigma'(norm_raw) (w . g)
    const std::size_t n = dir_raw.size();
    const double inv_len = 1.0 / cache.dir_length;
    double wg = 0.0;
    for (std::size_t i = 0; i < n; ++i) wg += dir_raw[i] * inv_len * upstream[i];
    const double s = cache.norm * inv_len;
    for (std::size_t i = 0; i < n; ++i) grad_dir[i] += s * (upstream[i] - dir_raw[i] * inv_len * wg);
    if (!cache.clamped) {
        const double sg = sigmoid(norm_raw);
        grad_norm += sg * (1.0 - sg) * wg;
    }
}

RawEmbedding reparam_grad(const RawEmbedding& raw, std::span<const double> upstream) {
    if (upstream.size() != raw.dir_raw.size()) throw InvalidInput("upstream gradient dimension mismatch");
    std::vector<double> scratch(raw.dir_raw.size());
    const auto cache = reparam_into(raw.dir_raw, raw.norm_raw, scratch);
    RawEmbedding g{std::vector<double>(raw.dir_raw.size(), 0.0), 0.0};
    reparam_backward(raw.dir_raw, raw.norm_raw, cache, upstream, g.dir_raw, g.norm_raw);
    return g;
}

void random_unit_direction(std::span<double> out, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (double& x : out) {
            x = gauss(rng);
            sq += x * x;
        }
    } while (sq < 1e-24);
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : out) x *= inv;
}

} // namespace hyptext::ball
