#pragma once

#include "hyptext/ball.hpp"
#include "hyptext/corpus.hpp"
#include "hyptext/optim.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hyptext::graph {

using corpus::TokenId;

/// Hyperparameters of the lookup-table trainer. Defaults are the WordNet
/// settings: batch 1024, lr 0.005, 10 negatives, clip 5, directions in
/// U[-0.001, 0.001] and norms around sigmoid(-5).
struct TrainConfig {
    std::size_t dim = 20;
    std::size_t batch_size = 1024;
    double lr = 0.005;
    std::size_t epochs = 50;
    std::size_t num_negatives = 10;
    double clip_norm = 5.0;
    std::uint64_t seed = 20180601;
    double init_dir_range = 0.001;
    double init_norm_value = -5.0;
    double init_norm_jitter = 0.1;
    ball::Metric metric = ball::Metric::hyperbolic;
    // Rejection attempts per negative slot before a draw is accepted as is.
    std::size_t rejection_attempts = 20;
    // Epochs run at lr / 10 before regular training (0 = off).
    std::size_t burn_in_epochs = 0;
    std::size_t threads = 1;
    // Forces a single thread so repeated runs are bit-identical.
    bool deterministic = true;

    void validate() const;
};

/// Raw (d+1)-wide rows: the first d values are the direction, the last the
/// pre-sigmoid norm.
class ReparamTable {
public:
    ReparamTable() = default;
    ReparamTable(std::size_t rows, std::size_t dim);

    /// Draws every row from the configured initial distribution.
    static ReparamTable initialize(std::size_t rows, const TrainConfig& config, std::mt19937_64& rng);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t width() const noexcept { return dim_ + 1; }

    std::span<double> row(std::size_t id);
    std::span<const double> row(std::size_t id) const;
    std::span<const double> direction(std::size_t id) const { return row(id).first(dim_); }
    double norm_raw(std::size_t id) const { return row(id)[dim_]; }

    std::span<double> data() noexcept { return raw_; }
    std::span<const double> data() const noexcept { return raw_; }

    /// Realized ball point of row `id`; throws OutOfRange for id >= rows().
    ball::BallPoint embed(std::size_t id) const;
    ball::ReparamCache embed_into(std::size_t id, std::span<double> out) const;
    /// rows() x dim() matrix of realized points.
    std::vector<double> realize_all() const;

    bool operator==(const ReparamTable&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> raw_;
};

/// Gradient rows for the table rows touched by a batch, in first-touch order.
class RowGradients {
public:
    explicit RowGradients(std::size_t width = 0) : width_(width) {}

    std::span<double> row(TokenId id);
    const std::vector<TokenId>& ids() const noexcept { return ids_; }
    std::span<double> row_at(std::size_t slot) { return {data_.data() + slot * width_, width_}; }
    std::span<const double> row_at(std::size_t slot) const { return {data_.data() + slot * width_, width_}; }
    std::span<double> data() noexcept { return data_; }
    std::size_t width() const noexcept { return width_; }
    /// Empty span when the row was not touched.
    std::span<const double> find(TokenId id) const;

private:
    std::size_t width_;
    std::vector<TokenId> ids_;
    std::vector<double> data_;
    std::unordered_map<TokenId, std::size_t> slot_;
};

/// Uniform negatives over V \ {u}. A draw that hits a known neighbor is redrawn,
/// up to `rejection_attempts` draws in total; the last draw is kept regardless.
class NegativeSampler {
public:
    /// `adjacency[u]` is the sorted list of nodes related to u.
    NegativeSampler(std::size_t num_nodes, std::vector<std::vector<TokenId>> adjacency, std::size_t rejection_attempts);

    static NegativeSampler from_edges(std::size_t num_nodes, std::span<const std::pair<TokenId, TokenId>> edges,
                                      std::size_t rejection_attempts);
    static NegativeSampler from_cooc(const corpus::CoocGraph& graph, std::size_t rejection_attempts);

    void sample(TokenId u, std::size_t k, std::mt19937_64& rng, std::vector<TokenId>& out) const;
    std::vector<TokenId> sample(TokenId u, std::size_t k, std::mt19937_64& rng) const;

    bool is_neighbor(TokenId u, TokenId v) const;
    std::size_t num_nodes() const noexcept { return num_nodes_; }

private:
    std::size_t num_nodes_;
    std::vector<std::vector<TokenId>> adjacency_;
    std::size_t attempts_;
};

struct BatchLoss {
    double loss = 0.0;            // mean over positives
    RowGradients grads;           // d loss / d raw row, touched rows only
    std::size_t degenerate_pairs = 0;
};

/// Softmax-of-negative-distance loss for a batch of positives (u, v), where
/// negatives[i*k .. (i+1)*k) belong to positive i. Gradients flow through
/// both endpoints of every distance and through the re-parameterization.
BatchLoss batch_loss(const ReparamTable& table, std::span<const std::pair<TokenId, TokenId>> positives,
                     std::span<const TokenId> negatives, ball::Metric metric, std::size_t threads = 1);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::size_t steps = 0;
    std::size_t degenerate_pairs = 0;
    std::size_t direction_resets = 0;
    double seconds = 0.0;
};

struct TrainResult {
    ReparamTable table;
    std::vector<EpochLog> log;
    std::int64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochLog&, const ReparamTable&)>;

/// Shuffled positive batches (weighted draws for co-occurrence graphs), each
/// step batch_loss -> clip_by_global_norm -> sparse Adam.
TrainResult train(const corpus::EdgeList& edges, const TrainConfig& config, const EpochCallback& on_epoch = {});
TrainResult train(const corpus::CoocGraph& graph, const TrainConfig& config, const EpochCallback& on_epoch = {});

} // namespace hyptext::graph
