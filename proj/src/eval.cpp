#include "hyptext/eval.hpp"

#include "hyptext/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace hyptext::eval {

std::vector<double> average_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && xs[order[j]] == xs[order[i]]) ++j;
        // positions i..j-1 share the mean of ranks i+1..j
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
        i = j;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw InvalidInput("spearman: inputs differ in length");
    if (xs.size() < 2) throw InvalidInput("spearman: need at least two observations");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::isnan(xs[i]) || std::isnan(ys[i])) throw InvalidInput("spearman: NaN input");
    }
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double a = rx[i] - mean;
        const double b = ry[i] - mean;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("spearman: one input is constant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---- Reconstruction --------------------------------------------------------------

namespace {

struct ParentResult {
    double ap = 0.0;
    std::uint64_t rank_sum = 0;
    std::size_t children = 0;
};

ParentResult evaluate_parent(const EmbeddingView& emb, TokenId u, const std::vector<TokenId>& children,
                             ball::Metric metric, std::vector<double>& dist, std::vector<double>& others) {
    const std::size_t n = emb.rows();
    for (std::size_t x = 0; x < n; ++x) dist[x] = x == u ? 0.0 : ball::distance(metric, emb.row(u), emb.row(x));
    others.clear();
    std::size_t ci = 0; // children are sorted
    for (std::size_t x = 0; x < n; ++x) {
        if (x == u) continue;
        if (ci < children.size() && children[ci] == x) {
            ++ci;
            continue;
        }
        others.push_back(dist[x]);
    }
    std::sort(others.begin(), others.end());

    std::vector<std::pair<double, std::uint64_t>> child_ranks;
    child_ranks.reserve(children.size());
    for (TokenId v : children) {
        const auto closer = std::lower_bound(others.begin(), others.end(), dist[v]) - others.begin();
        child_ranks.emplace_back(dist[v], static_cast<std::uint64_t>(closer) + 1);
    }
    std::sort(child_ranks.begin(), child_ranks.end());

    ParentResult r;
    r.children = children.size();
    double prec_sum = 0.0;
    for (std::size_t k = 0; k < child_ranks.size(); ++k) {
        const auto rank = child_ranks[k].second;
        r.rank_sum += rank;
        // k+1 children and rank-1 non-children precede or equal this child
        const double position = static_cast<double>(k + 1 + rank - 1);
        prec_sum += static_cast<double>(k + 1) / position;
    }
    r.ap = prec_sum / static_cast<double>(child_ranks.size());
    return r;
}

} // namespace

Reconstruction reconstruction(const EmbeddingView& emb, std::span<const std::pair<TokenId, TokenId>> edges,
                              ball::Metric metric, std::size_t threads) {
    const std::size_t n = emb.rows();
    std::map<TokenId, std::vector<TokenId>> children;
    for (const auto& [u, v] : edges) {
        if (u >= n) throw OutOfRange("reconstruction: node " + std::to_string(u) + " has no embedding");
        if (v >= n) throw OutOfRange("reconstruction: node " + std::to_string(v) + " has no embedding");
        if (u == v) continue;
        children[u].push_back(v);
    }
    if (children.empty()) throw InvalidInput("reconstruction: no edges");
    std::vector<std::pair<TokenId, std::vector<TokenId>>> parents;
    parents.reserve(children.size());
    for (auto& [u, cs] : children) {
        std::sort(cs.begin(), cs.end());
        cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
        parents.emplace_back(u, std::move(cs));
    }

    std::vector<ParentResult> results(parents.size());
    auto work = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> dist(n);
        std::vector<double> others;
        others.reserve(n);
        for (std::size_t i = lo; i < hi; ++i) {
            results[i] = evaluate_parent(emb, parents[i].first, parents[i].second, metric, dist, others);
        }
    };
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, parents.size()));
    if (nthreads == 1) {
        work(0, parents.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t per = (parents.size() + nthreads - 1) / nthreads;
        for (std::size_t t = 0; t < nthreads; ++t) {
            const std::size_t lo = std::min(parents.size(), t * per);
            const std::size_t hi = std::min(parents.size(), lo + per);
            pool.emplace_back(work, lo, hi);
        }
    }

    Reconstruction out;
    std::uint64_t rank_sum = 0;
    double ap_sum = 0.0;
    for (const auto& r : results) {
        rank_sum += r.rank_sum;
        ap_sum += r.ap;
        out.pairs += r.children;
    }
    out.parents = results.size();
    out.mean_rank = static_cast<double>(rank_sum) / static_cast<double>(out.pairs);
    out.map = ap_sum / static_cast<double>(out.parents);
    return out;
}

// ---- Neighbors -------------------------------------------------------------------

NeighborMetric parse_neighbor_metric(const std::string& name) {
    if (name == "cosine") return NeighborMetric::cosine;
    if (name == "hyperbolic" || name == "poincare") return NeighborMetric::hyperbolic;
    throw InvalidInput("unknown neighbor metric '" + name + "'");
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingView& emb, TokenId query, std::size_t k, NeighborMetric metric) {
    const std::size_t n = emb.rows();
    if (query >= n) throw OutOfRange("nearest_neighbors: query id out of range");
    if (k >= n) throw InvalidInput("nearest_neighbors: k must be smaller than the number of points");
    std::vector<Neighbor> all;
    all.reserve(n - 1);
    for (std::size_t x = 0; x < n; ++x) {
        if (x == query) continue;
        const double s = metric == NeighborMetric::cosine ? ball::cosine_distance(emb.row(query), emb.row(x))
                                                          : ball::poincare_distance(emb.row(query), emb.row(x));
        all.push_back(Neighbor{static_cast<TokenId>(x), s});
    }
    auto less = [](const Neighbor& a, const Neighbor& b) { return a.score != b.score ? a.score < b.score : a.id < b.id; };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
    all.resize(k);
    return all;
}

// ---- Norm-based evaluations ---------------------------------------------------------

double hyperlex_score(std::span<const double> x, std::span<const double> y, double alpha) {
    const double nx = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    const double ny = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
    return -(1.0 + alpha * (ny - nx)) * ball::poincare_distance(x, y);
}

double norm_freq_corr(const EmbeddingView& emb, std::span<const std::uint64_t> counts) {
    if (counts.size() != emb.rows()) throw InvalidInput("norm_freq_corr: counts and embeddings differ in size");
    std::vector<double> inv_f;
    std::vector<double> norms;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        inv_f.push_back(1.0 / static_cast<double>(counts[i]));
        norms.push_back(ball::hyperbolic_norm(emb.row(i)));
    }
    return spearman(inv_f, norms);
}

TreeHeightResult tree_height_corr(const SpanEncoder& encode, std::span<const corpus::ParseNode> trees) {
    std::vector<double> norms;
    std::vector<double> heights;
    std::vector<const corpus::ParseNode*> stack;
    for (const auto& t : trees) {
        stack.push_back(&t);
        while (!stack.empty()) {
            const auto* node = stack.back();
            stack.pop_back();
            norms.push_back(ball::hyperbolic_norm(encode(node->span)));
            heights.push_back(static_cast<double>(node->height));
            for (const auto& c : node->children) stack.push_back(&c);
        }
    }
    if (norms.size() < 2) throw UndefinedCorrelation("tree_height_corr: fewer than two nodes");
    return TreeHeightResult{spearman(norms, heights), norms.size()};
}

// ---- Pair datasets ---------------------------------------------------------------

std::vector<ScoredPair> parse_scored_pairs(std::istream& in) {
    std::vector<ScoredPair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() < 3) {
            if (lineno == 1) continue;
            throw ParseError("pair file line " + std::to_string(lineno) + ": expected word1<TAB>word2<TAB>score", lineno);
        }
        double score = 0.0;
        try {
            std::size_t used = 0;
            score = std::stod(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            if (lineno == 1) continue; // header
            throw ParseError("pair file line " + std::to_string(lineno) + ": bad score '" + fields[2] + "'", lineno);
        }
        out.push_back(ScoredPair{fields[0], fields[1], score});
    }
    return out;
}

std::vector<ScoredPair> load_scored_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_scored_pairs(in);
}

namespace {

template <typename Score>
PairEvalResult pair_eval(const EmbeddingView& emb, const corpus::Vocab& vocab, std::span<const ScoredPair> pairs,
                         Score score) {
    std::vector<double> gold;
    std::vector<double> model;
    PairEvalResult r;
    for (const auto& p : pairs) {
        const auto a = vocab.find(p.first);
        const auto b = vocab.find(p.second);
        if (!a || !b || *a >= emb.rows() || *b >= emb.rows()) {
            ++r.skipped;
            continue;
        }
        gold.push_back(p.gold);
        model.push_back(score(emb.row(*a), emb.row(*b)));
    }
    if (gold.empty()) throw InvalidInput("every evaluation pair is out of vocabulary");
    r.used = gold.size();
    r.rho = spearman(gold, model);
    return r;
}

} // namespace

PairEvalResult wordsim_eval(const EmbeddingView& emb, const corpus::Vocab& vocab, std::span<const ScoredPair> pairs) {
    return pair_eval(emb, vocab, pairs, [](auto x, auto y) { return -ball::cosine_distance(x, y); });
}

PairEvalResult hyperlex_eval(const EmbeddingView& emb, const corpus::Vocab& vocab, std::span<const ScoredPair> pairs,
                             double alpha) {
    return pair_eval(emb, vocab, pairs, [alpha](auto x, auto y) { return hyperlex_score(x, y, alpha); });
}

// ---- Report ----------------------------------------------------------------------

void EvalReport::set_metric(const std::string& name, double value) {
    if (!std::isfinite(value)) throw InvalidInput("metric '" + name + "' is not finite");
    metrics_[name] = value;
}

nlohmann::json EvalReport::to_json() const {
    return nlohmann::json{
        {"metrics", metrics_},
        {"datasets", datasets_},
        {"notes", notes_},
        {"config", config_},
    };
}

} // namespace hyptext::eval
