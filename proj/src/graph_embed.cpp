#include "hyptext/graph_embed.hpp"

#include "hyptext/errors.hpp"
#include "hyptext/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <thread>

namespace hyptext::graph {

void TrainConfig::validate() const {
    if (dim < 2) throw InvalidInput("embedding dimension must be at least 2");
    if (batch_size < 1) throw InvalidInput("batch size must be positive");
    if (!(lr > 0.0)) throw InvalidInput("learning rate must be positive");
    if (num_negatives < 1) throw InvalidInput("need at least one negative per positive");
    if (!(clip_norm > 0.0)) throw InvalidInput("clip norm must be positive");
    if (!(init_dir_range > 0.0)) throw InvalidInput("direction init range must be positive");
    if (init_norm_jitter < 0.0) throw InvalidInput("norm init jitter must be non-negative");
    if (rejection_attempts < 1) throw InvalidInput("rejection attempts must be positive");
    if (threads < 1) throw InvalidInput("threads must be positive");
}

// ---- ReparamTable ---------------------------------------------------------------

ReparamTable::ReparamTable(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), raw_(rows * (dim + 1), 0.0) {}

ReparamTable ReparamTable::initialize(std::size_t rows, const TrainConfig& config, std::mt19937_64& rng) {
    ReparamTable t(rows, config.dim);
    std::uniform_real_distribution<double> dir(-config.init_dir_range, config.init_dir_range);
    std::uniform_real_distribution<double> jitter(-config.init_norm_jitter, config.init_norm_jitter);
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = t.row(r);
        double sq = 0.0;
        do {
            sq = 0.0;
            for (std::size_t i = 0; i < config.dim; ++i) {
                row[i] = dir(rng);
                sq += row[i] * row[i];
            }
        } while (std::sqrt(sq) < ball::kDirectionGuard);
        row[config.dim] = config.init_norm_value + (config.init_norm_jitter > 0.0 ? jitter(rng) : 0.0);
    }
    return t;
}

std::span<double> ReparamTable::row(std::size_t id) {
    if (id >= rows_) throw OutOfRange("embedding id " + std::to_string(id) + " >= table size " + std::to_string(rows_));
    return {raw_.data() + id * width(), width()};
}

std::span<const double> ReparamTable::row(std::size_t id) const {
    if (id >= rows_) throw OutOfRange("embedding id " + std::to_string(id) + " >= table size " + std::to_string(rows_));
    return {raw_.data() + id * width(), width()};
}

ball::BallPoint ReparamTable::embed(std::size_t id) const {
    std::vector<double> out(dim_);
    embed_into(id, out);
    return ball::BallPoint::from_coords(std::move(out));
}

ball::ReparamCache ReparamTable::embed_into(std::size_t id, std::span<double> out) const {
    const auto r = row(id);
    return ball::reparam_into(r.first(dim_), r[dim_], out);
}

std::vector<double> ReparamTable::realize_all() const {
    std::vector<double> out(rows_ * dim_);
    for (std::size_t r = 0; r < rows_; ++r) embed_into(r, {out.data() + r * dim_, dim_});
    return out;
}

// ---- RowGradients ---------------------------------------------------------------

std::span<double> RowGradients::row(TokenId id) {
    auto [it, inserted] = slot_.try_emplace(id, ids_.size());
    if (inserted) {
        ids_.push_back(id);
        data_.resize(data_.size() + width_, 0.0);
    }
    return row_at(it->second);
}

std::span<const double> RowGradients::find(TokenId id) const {
    auto it = slot_.find(id);
    if (it == slot_.end()) return {};
    return row_at(it->second);
}

// ---- NegativeSampler ------------------------------------------------------------

NegativeSampler::NegativeSampler(std::size_t num_nodes, std::vector<std::vector<TokenId>> adjacency,
                                 std::size_t rejection_attempts)
    : num_nodes_(num_nodes), adjacency_(std::move(adjacency)), attempts_(rejection_attempts) {
    if (num_nodes_ < 2) throw InvalidInput("negative sampling needs at least two nodes");
    if (adjacency_.size() != num_nodes_) throw InvalidInput("adjacency size does not match node count");
    for (auto& a : adjacency_) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
}

NegativeSampler NegativeSampler::from_edges(std::size_t num_nodes, std::span<const std::pair<TokenId, TokenId>> edges,
                                            std::size_t rejection_attempts) {
    std::vector<std::vector<TokenId>> adj(num_nodes);
    for (const auto& [a, b] : edges) {
        adj.at(a).push_back(b);
        adj.at(b).push_back(a);
    }
    return NegativeSampler(num_nodes, std::move(adj), rejection_attempts);
}

NegativeSampler NegativeSampler::from_cooc(const corpus::CoocGraph& graph, std::size_t rejection_attempts) {
    std::vector<std::vector<TokenId>> adj(graph.vocab.size());
    for (const auto& e : graph.edges) {
        adj.at(e.u).push_back(e.v);
        adj.at(e.v).push_back(e.u);
    }
    return NegativeSampler(graph.vocab.size(), std::move(adj), rejection_attempts);
}

bool NegativeSampler::is_neighbor(TokenId u, TokenId v) const {
    const auto& a = adjacency_.at(u);
    return std::binary_search(a.begin(), a.end(), v);
}

void NegativeSampler::sample(TokenId u, std::size_t k, std::mt19937_64& rng, std::vector<TokenId>& out) const {
    if (u >= num_nodes_) throw OutOfRange("negative sampling anchor out of range");
    std::uniform_int_distribution<std::size_t> pick(0, num_nodes_ - 2);
    for (std::size_t slot = 0; slot < k; ++slot) {
        TokenId draw = 0;
        for (std::size_t attempt = 0;; ++attempt) {
            std::size_t x = pick(rng);
            if (x >= u) ++x;
            draw = static_cast<TokenId>(x);
            if (attempt + 1 >= attempts_ || !is_neighbor(u, draw)) break;
        }
        out.push_back(draw);
    }
}

std::vector<TokenId> NegativeSampler::sample(TokenId u, std::size_t k, std::mt19937_64& rng) const {
    std::vector<TokenId> out;
    out.reserve(k);
    sample(u, k, rng, out);
    return out;
}

// ---- Loss -----------------------------------------------------------------------

namespace {

struct Realized {
    std::vector<TokenId> ids;
    std::vector<double> points; // slots x dim
    std::vector<ball::ReparamCache> caches;
    std::unordered_map<TokenId, std::size_t> slot;

    std::size_t add(const ReparamTable& table, TokenId id) {
        auto [it, inserted] = slot.try_emplace(id, ids.size());
        if (inserted) {
            ids.push_back(id);
            points.resize(points.size() + table.dim());
            caches.push_back(table.embed_into(id, {points.data() + it->second * table.dim(), table.dim()}));
        }
        return it->second;
    }
};

struct ChunkResult {
    double loss = 0.0;
    std::size_t degenerate = 0;
    std::vector<double> point_grads;
};

void loss_chunk(std::size_t begin, std::size_t end, std::size_t k, std::size_t dim, const Realized& rz,
                std::span<const std::size_t> pos_slots, std::span<const std::size_t> neg_slots, ball::Metric metric,
                double inv_batch, ChunkResult& out) {
    std::vector<ball::DistancePartials> parts(k + 1);
    std::vector<std::size_t> slots(k + 1);
    auto point = [&](std::size_t s) { return std::span<const double>(rz.points.data() + s * dim, dim); };
    auto grad = [&](std::size_t s) { return std::span<double>(out.point_grads.data() + s * dim, dim); };

    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t su = pos_slots[2 * i];
        slots[0] = pos_slots[2 * i + 1];
        for (std::size_t j = 0; j < k; ++j) slots[j + 1] = neg_slots[i * k + j];

        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= k; ++j) {
            parts[j] = ball::distance_partials(metric, point(su), point(slots[j]));
            max_logit = std::max(max_logit, -parts[j].distance);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= k; ++j) z += std::exp(-parts[j].distance - max_logit);
        const double lse = max_logit + std::log(z);
        out.loss += parts[0].distance + lse;

        for (std::size_t j = 0; j <= k; ++j) {
            const double p = std::exp(-parts[j].distance - lse);
            const double upstream = ((j == 0 ? 1.0 : 0.0) - p) * inv_batch;
            if (parts[j].degenerate) {
                ++out.degenerate;
                continue;
            }
            ball::accumulate_partials(parts[j], upstream, point(su), point(slots[j]), grad(su), grad(slots[j]));
        }
    }
}

} // namespace

BatchLoss batch_loss(const ReparamTable& table, std::span<const std::pair<TokenId, TokenId>> positives,
                     std::span<const TokenId> negatives, ball::Metric metric, std::size_t threads) {
    const std::size_t b = positives.size();
    if (b == 0) throw InvalidInput("batch_loss: empty batch");
    if (negatives.size() % b != 0) throw InvalidInput("batch_loss: negatives are not a multiple of the batch size");
    const std::size_t k = negatives.size() / b;
    const std::size_t dim = table.dim();

    Realized rz;
    std::vector<std::size_t> pos_slots(2 * b);
    std::vector<std::size_t> neg_slots(negatives.size());
    for (std::size_t i = 0; i < b; ++i) {
        const auto [u, v] = positives[i];
        pos_slots[2 * i] = rz.add(table, u);
        pos_slots[2 * i + 1] = rz.add(table, v);
        for (std::size_t j = 0; j < k; ++j) {
            const TokenId n = negatives[i * k + j];
            if (n == u) throw InvalidInput("batch_loss: negative equals its anchor");
            neg_slots[i * k + j] = rz.add(table, n);
        }
    }

    const double inv_batch = 1.0 / static_cast<double>(b);
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, b));
    std::vector<ChunkResult> chunks(nthreads);
    for (auto& c : chunks) c.point_grads.assign(rz.ids.size() * dim, 0.0);

    if (nthreads == 1) {
        loss_chunk(0, b, k, dim, rz, pos_slots, neg_slots, metric, inv_batch, chunks[0]);
    } else {
        std::vector<std::jthread> workers;
        const std::size_t per = (b + nthreads - 1) / nthreads;
        for (std::size_t t = 0; t < nthreads; ++t) {
            const std::size_t lo = std::min(b, t * per);
            const std::size_t hi = std::min(b, lo + per);
            workers.emplace_back([&, lo, hi, t] {
                loss_chunk(lo, hi, k, dim, rz, pos_slots, neg_slots, metric, inv_batch, chunks[t]);
            });
        }
    }

    BatchLoss out{0.0, RowGradients(table.width()), 0};
    std::vector<double>& pg = chunks[0].point_grads;
    out.loss = chunks[0].loss;
    out.degenerate_pairs = chunks[0].degenerate;
    for (std::size_t t = 1; t < nthreads; ++t) {
        kernels::axpy(1.0, chunks[t].point_grads.data(), pg.data(), pg.size());
        out.loss += chunks[t].loss;
        out.degenerate_pairs += chunks[t].degenerate;
    }
    out.loss *= inv_batch;

    for (std::size_t s = 0; s < rz.ids.size(); ++s) {
        const TokenId id = rz.ids[s];
        const auto raw = table.row(id);
        auto g = out.grads.row(id);
        ball::reparam_backward(raw.first(dim), raw[dim], rz.caches[s], {pg.data() + s * dim, dim}, g.first(dim), g[dim]);
    }
    return out;
}

// ---- Training -------------------------------------------------------------------

namespace {

using Positive = std::pair<TokenId, TokenId>;
using EpochSource = std::function<void(std::mt19937_64&, std::vector<Positive>&)>;

std::size_t repair_directions(ReparamTable& table, std::span<const Positive> batch, std::span<const TokenId> negatives,
                              double scale, std::mt19937_64& rng) {
    std::size_t resets = 0;
    auto check = [&](TokenId id) {
        auto row = table.row(id);
        auto dir = row.first(table.dim());
        if (std::sqrt(kernels::squared_norm(dir.data(), dir.size())) < ball::kDirectionGuard) {
            ball::random_unit_direction(dir, rng);
            kernels::scale(scale, dir.data(), dir.size());
            ++resets;
        }
    };
    for (const auto& [u, v] : batch) {
        check(u);
        check(v);
    }
    for (TokenId n : negatives) check(n);
    return resets;
}

TrainResult train_impl(std::size_t num_nodes, const NegativeSampler& sampler, const EpochSource& source,
                       const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    TrainResult result;
    result.table = ReparamTable::initialize(num_nodes, config, rng);
    ReparamTable& table = result.table;
    optim::SparseRowAdam adam(num_nodes, table.width());
    const std::size_t threads = config.deterministic ? 1 : config.threads;

    std::vector<Positive> epoch_positives;
    std::vector<TokenId> negatives;
    const std::size_t total_epochs = config.burn_in_epochs + config.epochs;
    for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        optim::AdamHyper hyper;
        hyper.lr = epoch < config.burn_in_epochs ? config.lr / 10.0 : config.lr;

        epoch_positives.clear();
        source(rng, epoch_positives);

        EpochLog log;
        log.epoch = epoch + 1;
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < epoch_positives.size(); start += config.batch_size) {
            const std::size_t end = std::min(epoch_positives.size(), start + config.batch_size);
            std::span<const Positive> batch(epoch_positives.data() + start, end - start);
            negatives.clear();
            for (const auto& [u, v] : batch) sampler.sample(u, config.num_negatives, rng, negatives);
            log.direction_resets += repair_directions(table, batch, negatives, config.init_dir_range, rng);

            auto bl = batch_loss(table, batch, negatives, config.metric, threads);
            const optim::GradBlock block{"embedding table", bl.grads.data()};
            optim::clip_by_global_norm(std::span<const optim::GradBlock>(&block, 1), config.clip_norm);
            for (std::size_t s = 0; s < bl.grads.ids().size(); ++s) {
                const TokenId id = bl.grads.ids()[s];
                adam.step_row(id, table.row(id), bl.grads.row_at(s), hyper);
            }
            loss_sum += bl.loss;
            log.degenerate_pairs += bl.degenerate_pairs;
            ++log.steps;
            ++result.steps;
        }
        log.mean_loss = log.steps > 0 ? loss_sum / static_cast<double>(log.steps) : 0.0;
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(log);
        if (on_epoch) on_epoch(log, table);
    }
    return result;
}

} // namespace

TrainResult train(const corpus::EdgeList& edges, const TrainConfig& config, const EpochCallback& on_epoch) {
    if (edges.edges.empty()) throw EmptyCorpus("cannot train on an empty edge list");
    const auto sampler = NegativeSampler::from_edges(edges.nodes.size(), edges.edges, config.rejection_attempts);
    EpochSource source = [&edges](std::mt19937_64& rng, std::vector<Positive>& out) {
        out.assign(edges.edges.begin(), edges.edges.end());
        std::shuffle(out.begin(), out.end(), rng);
    };
    return train_impl(edges.nodes.size(), sampler, source, config, on_epoch);
}

TrainResult train(const corpus::CoocGraph& graph, const TrainConfig& config, const EpochCallback& on_epoch) {
    if (graph.edges.empty()) throw EmptyCorpus("cannot train on an empty co-occurrence graph");
    const auto sampler = NegativeSampler::from_cooc(graph, config.rejection_attempts);
    std::vector<double> weights;
    weights.reserve(graph.edges.size());
    for (const auto& e : graph.edges) weights.push_back(e.weight);
    auto pick = std::make_shared<std::discrete_distribution<std::size_t>>(weights.begin(), weights.end());
    const std::uint64_t draws = graph.epoch_draws();
    EpochSource source = [&graph, pick, draws](std::mt19937_64& rng, std::vector<Positive>& out) {
        out.reserve(draws);
        for (std::uint64_t i = 0; i < draws; ++i) {
            const auto& e = graph.edges[(*pick)(rng)];
            // The loss anchors negatives on the first endpoint; orient at random.
            if (rng() & 1ULL) {
                out.emplace_back(e.u, e.v);
            } else {
                out.emplace_back(e.v, e.u);
            }
        }
    };
    return train_impl(graph.vocab.size(), sampler, source, config, on_epoch);
}

} // namespace hyptext::graph
