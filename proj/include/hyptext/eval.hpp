#pragma once

#include "hyptext/ball.hpp"
#include "hyptext/corpus.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hyptext::eval {

using corpus::TokenId;

/// Row-major rows x dim matrix of realized ball points.
struct EmbeddingView {
    std::span<const double> points;
    std::size_t dim = 0;

    std::size_t rows() const noexcept { return dim == 0 ? 0 : points.size() / dim; }
    std::span<const double> row(std::size_t i) const { return points.subspan(i * dim, dim); }
};

/// Fractional (average) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> xs);

/// Spearman's rho: Pearson correlation of average ranks. Throws
/// UndefinedCorrelation when either side is constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct Reconstruction {
    double mean_rank = 0.0; // pooled over all (parent, child) pairs
    double map = 0.0;       // mean over parents of average precision
    std::size_t parents = 0;
    std::size_t pairs = 0;
};

/// For every parent u and true child v, v's rank by distance from u among all
/// nodes except u and u's other children (ties resolved in the child's
/// favour). Duplicate edges count once.
Reconstruction reconstruction(const EmbeddingView& emb, std::span<const std::pair<TokenId, TokenId>> edges,
                              ball::Metric metric = ball::Metric::hyperbolic, std::size_t threads = 1);

enum class NeighborMetric { cosine, hyperbolic };
NeighborMetric parse_neighbor_metric(const std::string& name);

struct Neighbor {
    TokenId id = 0;
    double score = 0.0; // distance under the chosen metric
};

/// k nearest other points, ascending by distance, ties by id. Requires
/// k < rows().
std::vector<Neighbor> nearest_neighbors(const EmbeddingView& emb, TokenId query, std::size_t k, NeighborMetric metric);

/// -(1 + alpha (|y| - |x|)) d(x, y)
double hyperlex_score(std::span<const double> x, std::span<const double> y, double alpha);

/// Spearman between 1/f and the hyperbolic norm, over rows with f > 0.
double norm_freq_corr(const EmbeddingView& emb, std::span<const std::uint64_t> counts);

/// Maps a token span to a ball point.
using SpanEncoder = std::function<std::vector<double>(const std::vector<std::string>&)>;

struct TreeHeightResult {
    double rho = 0.0;
    std::size_t nodes = 0;
};

/// Spearman between the hyperbolic norm of each node's encoded span and the
/// node's height, pooled over every node of every tree (leaves have height 0).
TreeHeightResult tree_height_corr(const SpanEncoder& encode, std::span<const corpus::ParseNode> trees);

struct ScoredPair {
    std::string first;
    std::string second;
    double gold = 0.0;
};

/// "word1<TAB>word2<TAB>score" lines; a first line whose score does not parse
/// is treated as a header.
std::vector<ScoredPair> parse_scored_pairs(std::istream& in);
std::vector<ScoredPair> load_scored_pairs(const std::filesystem::path& path);

struct PairEvalResult {
    double rho = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0; // out-of-vocabulary pairs
};

/// Spearman between gold scores and negative cosine distances.
PairEvalResult wordsim_eval(const EmbeddingView& emb, const corpus::Vocab& vocab, std::span<const ScoredPair> pairs);

/// Spearman between gold scores and is-a scores.
PairEvalResult hyperlex_eval(const EmbeddingView& emb, const corpus::Vocab& vocab, std::span<const ScoredPair> pairs,
                             double alpha);

/// Metric name -> value map plus run metadata.
class EvalReport {
public:
    /// Throws InvalidInput for non-finite values.
    void set_metric(const std::string& name, double value);
    void set_note(const std::string& key, const std::string& value) { notes_[key] = value; }
    void set_dataset(const std::string& key, const std::string& value) { datasets_[key] = value; }
    void set_config(nlohmann::json config) { config_ = std::move(config); }

    const std::map<std::string, double>& metrics() const noexcept { return metrics_; }
    double metric(const std::string& name) const { return metrics_.at(name); }

    nlohmann::json to_json() const;

private:
    std::map<std::string, double> metrics_;
    std::map<std::string, std::string> notes_;
    std::map<std::string, std::string> datasets_;
    nlohmann::json config_ = nlohmann::json::object();
};

} // namespace hyptext::eval
