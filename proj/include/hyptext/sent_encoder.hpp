#pragma once

#include "hyptext/ball.hpp"
#include "hyptext/corpus.hpp"
#include "hyptext/gru.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hyptext::sent {

using corpus::TokenId;

enum class ContextDivisor {
    fixed,     // always 2K, also at sentence boundaries
    available  // number of context words actually present
};

std::string_view to_string(ContextDivisor d) noexcept;
ContextDivisor parse_context_divisor(std::string_view name);

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t word_dim = 32;   // d_w, input table width
    std::size_t hidden_dim = 16; // d_h per GRU direction; encoder output is 2 d_h
    std::size_t ball_dim = 16;   // d
    bool layer_norm = true;
    std::size_t context_window = 2; // K
    ContextDivisor context_divisor = ContextDivisor::fixed;
    ball::Metric metric = ball::Metric::hyperbolic;

    std::size_t encoder_dim() const noexcept { return 2 * hidden_dim; }
    void validate() const;
};

struct InitConfig {
    double table_range = 0.1;   // uniform(-r, r) for the three word tables
    double gru_range = 0.1;     // GRU input and recurrent weights
    double dir_head_range = 0.1;
    double norm_head_range = 0.01;
    double norm_head_bias = -2.0;
    double log_lambda = 0.0;    // lambda = exp(0) = 1
};

/// One named, contiguous slice of the flat parameter vector.
struct ParamGroup {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
};

/// Group layout, in storage order:
///   input_embedding   |V| x d_w
///   context_embedding |V| x d_e
///   output_embedding  |V| x d_e
///   gru_fwd.w, gru_fwd.u, gru_fwd.b, [gru_fwd.gain]
///   gru_bwd.w, gru_bwd.u, gru_bwd.b, [gru_bwd.gain]
///   head_dir   d x d_e   (direction = head_dir * x)
///   head_norm  1 x d_e
///   head_bias  1 x 1
///   log_lambda 1 x 2
class ParamLayout {
public:
    ParamLayout() = default;
    explicit ParamLayout(const ModelConfig& config);

    const std::vector<ParamGroup>& groups() const noexcept { return groups_; }
    const ParamGroup& group(std::string_view name) const;
    std::size_t total() const noexcept { return total_; }

private:
    std::vector<ParamGroup> groups_;
    std::size_t total_ = 0;
};

class SentModel {
public:
    SentModel() = default;
    /// Zero-filled parameters with the norm-head bias and log-lambdas set.
    explicit SentModel(const ModelConfig& config);

    static SentModel initialize(const ModelConfig& config, const InitConfig& init, std::mt19937_64& rng);

    const ModelConfig& config() const noexcept { return config_; }
    const ParamLayout& layout() const noexcept { return layout_; }

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }

    std::span<double> group(std::string_view name);
    std::span<const double> group(std::string_view name) const;

    gru::Weights forward_gru() const { return gru_weights(params_, "gru_fwd"); }
    gru::Weights backward_gru() const { return gru_weights(params_, "gru_bwd"); }
    gru::Weights gru_weights(std::span<const double> flat, std::string_view prefix) const;
    gru::Grads gru_grads(std::span<double> flat, std::string_view prefix) const;

    double lambda1() const;
    double lambda2() const;

    bool operator==(const SentModel& other) const { return params_ == other.params_; }

private:
    ModelConfig config_;
    ParamLayout layout_;
    std::vector<double> params_;
};

// ---- Embedding heads -------------------------------------------------------

/// Intermediate values of heads + reparam for one Euclidean input.
struct HeadCache {
    std::vector<double> input;   // Euclidean vector fed to the heads
    std::vector<double> dir_raw; // head_dir * input
    double norm_raw = 0.0;
    ball::ReparamCache reparam;
    std::vector<double> point;   // realized ball point
    bool random_direction = false;
};

/// What to do when head_dir * x is too short to normalize.
struct DirectionFallback {
    std::mt19937_64* rng = nullptr; // nullptr: throw DegenerateDirection
};

/// Maps a Euclidean vector onto the ball through the shared heads. When the
/// raw direction collapses and a fallback rng is supplied, a fresh random unit
/// direction is used and no gradient reaches head_dir through this point.
void apply_heads(const SentModel& model, std::span<const double> x, HeadCache& cache, DirectionFallback fallback = {});

/// Accumulates gradients of upstream (on the ball point) into head_dir,
/// head_norm, head_bias and grad_input.
void heads_backward(const SentModel& model, const HeadCache& cache, std::span<const double> upstream,
                    std::span<double> grad_params, std::span<double> grad_input);

// ---- Encoder ---------------------------------------------------------------

struct EncoderCache {
    std::vector<gru::StepCache> fwd;
    std::vector<gru::StepCache> bwd; // bwd[0] consumed the last token
    HeadCache head;
};

/// Concatenation of the forward GRU's final state and the backward GRU's
/// final state (which has read the sentence right to left).
std::vector<double> encode_euclidean(const SentModel& model, std::span<const TokenId> tokens, EncoderCache* cache = nullptr);

/// Sentence embedding in the ball. Throws InvalidInput for an empty sentence
/// or an out-of-range id, DegenerateDirection if the direction collapses.
ball::BallPoint encode(const SentModel& model, std::span<const TokenId> tokens);

void encode_backward(const SentModel& model, std::span<const TokenId> tokens, const EncoderCache& cache,
                     std::span<const double> upstream, std::span<double> grad_params);

/// Euclidean average of context-table rows at positions t-K..t+K (excluding
/// t) that fall inside the sentence, divided per the model's divisor mode.
/// With no available neighbours the result is the zero vector.
std::vector<double> context_average(const SentModel& model, std::span<const TokenId> sentence, std::size_t t);

ball::BallPoint context_embed(const SentModel& model, std::span<const TokenId> sentence, std::size_t t);

ball::BallPoint output_embed(const SentModel& model, TokenId word);

/// -lambda1 d(v, s) - lambda2 d(v, c).
double word_logit(double lambda1, double lambda2, std::span<const double> v, std::span<const double> s,
                  std::span<const double> c, ball::Metric metric = ball::Metric::hyperbolic);

// ---- Batches and loss ------------------------------------------------------

inline constexpr TokenId kPadId = std::numeric_limits<TokenId>::max();

/// Padded token matrix: rows of width `width`, entries past a row's length
/// are padding and never read.
struct PaddedSequences {
    std::vector<TokenId> ids;
    std::vector<std::size_t> lengths;
    std::size_t width = 0;

    std::size_t size() const noexcept { return lengths.size(); }
    std::span<const TokenId> row(std::size_t i) const { return {ids.data() + i * width, lengths[i]}; }
};

struct SentBatch {
    PaddedSequences source;
    PaddedSequences prev;
    PaddedSequences next;

    std::size_t size() const noexcept { return source.size(); }
};

/// Packs triples; `pad_to` widens every matrix to at least that many columns.
/// Throws InvalidInput when an id is not below vocab_size.
SentBatch make_batch(std::span<const corpus::Triple> triples, std::size_t vocab_size, std::size_t pad_to = 0);

struct Sampling {
    std::size_t negatives = 0; // 0: full softmax over the vocabulary

    static Sampling full() { return {}; }
    static Sampling sampled(std::size_t n) { return {n}; }
    /// Full softmax up to 2,048 types, otherwise 512 uniform negatives.
    static Sampling automatic(std::size_t vocab_size);
};

struct LossOptions {
    Sampling sampling;
    std::uint64_t seed = 0;      // negatives and direction fallback
    std::size_t threads = 1;
    bool compute_grad = true;
};

struct LossResult {
    double loss = 0.0;           // mean over predicted tokens
    std::size_t tokens = 0;
    std::vector<double> grad;    // same layout as model.params(); empty without compute_grad
};

LossResult sent_loss(const SentModel& model, const SentBatch& batch, const LossOptions& opts);

/// exp(mean per-token negative log-likelihood) under the full softmax.
double perplexity(const SentModel& model, std::span<const corpus::Triple> heldout, std::size_t threads = 1);
double perplexity_from_nll(double total_nll, std::size_t tokens);

// ---- Training --------------------------------------------------------------

struct TrainConfig {
    ModelConfig model;
    InitConfig init;
    double lr = 0.005;
    double lr_half_life = 100000.0;
    std::size_t batch_size = 64;
    std::size_t epochs = 5;
    double clip_norm = 5.0;
    std::size_t negatives = 0;   // 0: automatic
    bool full_softmax = false;   // force full softmax
    std::uint64_t seed = 20180601;
    std::size_t threads = 1;
    bool deterministic = true;

    void validate() const;
    Sampling sampling() const;
};

struct SentEpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double min_lambda = 0.0; // smallest lambda seen at any step of the epoch
    std::int64_t steps = 0;
    double seconds = 0.0;
};

struct SentTrainResult {
    SentModel model;
    std::vector<SentEpochLog> log;
    std::int64_t steps = 0;
};

/// Called after every epoch; returning false stops training.
using SentEpochCallback = std::function<bool(const SentEpochLog&, const SentModel&)>;
/// Called after every optimizer step with the global step count.
using SentStepCallback = std::function<void(std::int64_t, const SentModel&)>;

SentTrainResult train(std::span<const corpus::Triple> triples, const TrainConfig& config,
                      const SentEpochCallback& on_epoch = {}, const SentStepCallback& on_step = {});

// ---- Checkpoints -----------------------------------------------------------

nlohmann::json to_json(const TrainConfig& c);
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct SentCheckpoint {
    SentModel model;
    corpus::Vocab vocab;
    std::int64_t step = 0;
    nlohmann::json config;
};

/// Manifest {version, kind, dims, flags, lambda, step, vocab_hash, groups}
/// with one float32 little-endian array per parameter group, concatenated in
/// layout order in <prefix>.bin.
void save_sent(const std::filesystem::path& prefix, const SentCheckpoint& ckpt);
SentCheckpoint load_sent(const std::filesystem::path& prefix);

} // namespace hyptext::sent
