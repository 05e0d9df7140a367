#pragma once

// Independent reference implementations used to check the library. They favour
// obviousness over speed and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

inline long double sq(long double x) { return x * x; }

/// Poincare distance evaluated in extended precision straight from acosh.
inline double poincare(const std::vector<double>& u, const std::vector<double>& v) {
    long double uu = 0, vv = 0, dd = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += sq(u[i]);
        vv += sq(v[i]);
        dd += sq(static_cast<long double>(u[i]) - v[i]);
    }
    const long double x = 1.0L + 2.0L * dd / ((1.0L - uu) * (1.0L - vv));
    return static_cast<double>(std::acosh(std::max(x, 1.0L)));
}

inline double euclid(const std::vector<double>& u, const std::vector<double>& v) {
    long double dd = 0;
    for (std::size_t i = 0; i < u.size(); ++i) dd += sq(static_cast<long double>(u[i]) - v[i]);
    return static_cast<double>(std::sqrt(dd));
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    long double uv = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += static_cast<long double>(u[i]) * v[i];
        uu += sq(u[i]);
        vv += sq(v[i]);
    }
    return static_cast<double>(1.0L - uv / std::sqrt(uu * vv));
}

/// Fractional ranks by counting: 1 + #less + (#equal - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& xs) {
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double less = 0, equal = 0;
        for (double y : xs) {
            if (y < xs[i]) less += 1;
            if (y == xs[i]) equal += 1;
        }
        r[i] = 1.0 + less + (equal - 1.0) / 2.0;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return std::clamp(pearson(ranks(a), ranks(b)), -1.0, 1.0);
}

struct ReconResult {
    double mean_rank = 0;
    double map = 0;
};

/// Walks every parent's full candidate list sorted by (distance, non-child
/// after child, id) and reads ranks and precisions off the positions.
template <class Dist>
ReconResult reconstruction(const std::vector<std::vector<double>>& pts, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                           Dist dist) {
    std::map<std::uint32_t, std::set<std::uint32_t>> children;
    for (auto [u, v] : edges) children[u].insert(v);
    // Plain doubles in the same summation order as a straightforward
    // implementation, so agreement can be checked exactly.
    double rank_sum = 0, ap_sum = 0;
    std::size_t pairs = 0;
    for (const auto& [u, kids] : children) {
        struct Item {
            double d;
            bool child;
            std::uint32_t id;
        };
        std::vector<Item> items;
        for (std::uint32_t x = 0; x < pts.size(); ++x) {
            if (x == u) continue;
            items.push_back({dist(pts[u], pts[x]), kids.count(x) > 0, x});
        }
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
            if (a.d != b.d) return a.d < b.d;
            if (a.child != b.child) return a.child;
            return a.id < b.id;
        });
        std::size_t seen_children = 0, seen_others = 0;
        double ap = 0;
        for (std::size_t pos = 0; pos < items.size(); ++pos) {
            if (items[pos].child) {
                ++seen_children;
                rank_sum += 1 + seen_others;
                ap += static_cast<double>(seen_children) / static_cast<double>(pos + 1);
                ++pairs;
            } else {
                ++seen_others;
            }
        }
        ap_sum += ap / static_cast<double>(kids.size());
    }
    return {rank_sum / static_cast<double>(pairs), ap_sum / static_cast<double>(children.size())};
}

/// Brute-force k nearest neighbours: full sort of (distance, id).
template <class Dist>
std::vector<std::pair<std::uint32_t, double>> knn(const std::vector<std::vector<double>>& pts, std::uint32_t q, std::size_t k, Dist dist) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t x = 0; x < pts.size(); ++x) {
        if (x != q) all.push_back({dist(pts[q], pts[x]), x});
    }
    std::sort(all.begin(), all.end());
    std::vector<std::pair<std::uint32_t, double>> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back({all[i].second, all[i].first});
    return out;
}

/// Uniform random point strictly inside the ball of radius `max_norm`.
inline std::vector<double> random_ball_point(std::size_t dim, std::mt19937_64& rng, double max_norm = 0.99) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(dim);
    double n = 0;
    for (double& v : x) {
        v = g(rng);
        n += v * v;
    }
    n = std::sqrt(n);
    const double r = max_norm * std::pow(u(rng), 1.0 / static_cast<double>(dim));
    for (double& v : x) v *= r / n;
    return x;
}

/// Complete binary tree with `levels` levels, nodes numbered breadth first.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> binary_tree(std::uint32_t levels) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    const std::uint32_t n = (1u << levels) - 1;
    for (std::uint32_t c = 1; c < n; ++c) edges.push_back({(c - 1) / 2, c});
    return edges;
}

/// Central differences with the same step rule as the library checker,
/// judged elementwise as |a - n| <= atol + rtol * max(|a|, |n|).
struct FdReport {
    std::size_t violations = 0;
    std::size_t worst_index = 0;
    double worst_excess = 0.0; // |a - n| / (atol + rtol * max(|a|, |n|)), passing iff <= 1
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

inline FdReport fd_allclose(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                            std::span<const double> analytic, double rtol, double atol) {
    FdReport r;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double h = 1e-6 * std::max(1.0, std::abs(xi));
        x[i] = xi + h;
        const double up = f(x);
        x[i] = xi - h;
        const double down = f(x);
        x[i] = xi;
        const double n = (up - down) / (2 * h);
        const double a = analytic[i];
        const double excess = std::abs(a - n) / (atol + rtol * std::max(std::abs(a), std::abs(n)));
        if (excess > 1.0) ++r.violations;
        if (excess > r.worst_excess) r = FdReport{r.violations, i, excess, a, n};
    }
    return r;
}

} // namespace oracle
