#include "hyptext/sent_encoder.hpp"

#include "hyptext/checkpoint.hpp"
#include "hyptext/errors.hpp"
#include "hyptext/kernels.hpp"
#include "hyptext/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>
#include <unordered_set>

namespace hyptext::sent {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + kGolden * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void check_ids(std::span<const TokenId> ids, std::size_t vocab_size) {
    for (TokenId id : ids) {
        if (id >= vocab_size) throw InvalidInput("token id " + std::to_string(id) + " outside the vocabulary");
    }
}

} // namespace

std::string_view to_string(ContextDivisor d) noexcept {
    return d == ContextDivisor::fixed ? "fixed" : "available";
}

ContextDivisor parse_context_divisor(std::string_view name) {
    if (name == "fixed") return ContextDivisor::fixed;
    if (name == "available") return ContextDivisor::available;
    throw InvalidInput("unknown context divisor '" + std::string(name) + "' (expected fixed or available)");
}

void ModelConfig::validate() const {
    if (vocab_size < 2) throw InvalidInput("sentence model needs a vocabulary of at least 2 types");
    if (word_dim < 1 || hidden_dim < 1) throw InvalidInput("word and hidden dimensions must be positive");
    if (ball_dim < 2) throw InvalidInput("ball dimension must be at least 2");
    if (context_window < 1) throw InvalidInput("context window must be at least 1");
}

// ---- Layout and model --------------------------------------------------------

ParamLayout::ParamLayout(const ModelConfig& c) {
    c.validate();
    const std::size_t de = c.encoder_dim();
    const std::size_t g = 3 * c.hidden_dim;
    auto add = [this](std::string name, std::size_t rows, std::size_t cols) {
        groups_.push_back(ParamGroup{std::move(name), total_, rows, cols});
        total_ += rows * cols;
    };
    add("input_embedding", c.vocab_size, c.word_dim);
    add("context_embedding", c.vocab_size, de);
    add("output_embedding", c.vocab_size, de);
    for (const char* dir : {"gru_fwd", "gru_bwd"}) {
        const std::string p(dir);
        add(p + ".w", g, c.word_dim);
        add(p + ".u", g, c.hidden_dim);
        add(p + ".b", 1, g);
        if (c.layer_norm) add(p + ".gain", 1, g);
    }
    add("head_dir", c.ball_dim, de);
    add("head_norm", 1, de);
    add("head_bias", 1, 1);
    add("log_lambda", 1, 2);
}

const ParamGroup& ParamLayout::group(std::string_view name) const {
    for (const auto& g : groups_) {
        if (g.name == name) return g;
    }
    throw InvalidInput("no parameter group named '" + std::string(name) + "'");
}

SentModel::SentModel(const ModelConfig& config) : config_(config), layout_(config), params_(layout_.total(), 0.0) {
    InitConfig init;
    group("head_bias")[0] = init.norm_head_bias;
    if (config_.layer_norm) {
        std::fill_n(group("gru_fwd.gain").begin(), 3 * config_.hidden_dim, 1.0);
        std::fill_n(group("gru_bwd.gain").begin(), 3 * config_.hidden_dim, 1.0);
    }
}

SentModel SentModel::initialize(const ModelConfig& config, const InitConfig& init, std::mt19937_64& rng) {
    SentModel m(config);
    auto fill = [&rng](std::span<double> xs, double range) {
        std::uniform_real_distribution<double> u(-range, range);
        for (double& x : xs) x = u(rng);
    };
    fill(m.group("input_embedding"), init.table_range);
    fill(m.group("context_embedding"), init.table_range);
    fill(m.group("output_embedding"), init.table_range);
    for (const char* dir : {"gru_fwd", "gru_bwd"}) {
        const std::string p(dir);
        fill(m.group(p + ".w"), init.gru_range);
        fill(m.group(p + ".u"), init.gru_range);
    }
    fill(m.group("head_dir"), init.dir_head_range);
    fill(m.group("head_norm"), init.norm_head_range);
    m.group("head_bias")[0] = init.norm_head_bias;
    auto ll = m.group("log_lambda");
    ll[0] = ll[1] = init.log_lambda;
    return m;
}

std::span<double> SentModel::group(std::string_view name) {
    const auto& g = layout_.group(name);
    return std::span<double>(params_).subspan(g.offset, g.size());
}

std::span<const double> SentModel::group(std::string_view name) const {
    const auto& g = layout_.group(name);
    return std::span<const double>(params_).subspan(g.offset, g.size());
}

gru::Weights SentModel::gru_weights(std::span<const double> flat, std::string_view prefix) const {
    const std::string p(prefix);
    auto view = [&](const std::string& name) {
        const auto& g = layout_.group(name);
        return flat.subspan(g.offset, g.size());
    };
    gru::Weights w;
    w.w = view(p + ".w");
    w.u = view(p + ".u");
    w.b = view(p + ".b");
    if (config_.layer_norm) w.gain = view(p + ".gain");
    w.input = config_.word_dim;
    w.hidden = config_.hidden_dim;
    return w;
}

gru::Grads SentModel::gru_grads(std::span<double> flat, std::string_view prefix) const {
    const std::string p(prefix);
    auto view = [&](const std::string& name) {
        const auto& g = layout_.group(name);
        return flat.subspan(g.offset, g.size());
    };
    gru::Grads g;
    g.w = view(p + ".w");
    g.u = view(p + ".u");
    g.b = view(p + ".b");
    if (config_.layer_norm) g.gain = view(p + ".gain");
    return g;
}

double SentModel::lambda1() const { return std::exp(group("log_lambda")[0]); }
double SentModel::lambda2() const { return std::exp(group("log_lambda")[1]); }

// ---- Heads -------------------------------------------------------------------

void apply_heads(const SentModel& model, std::span<const double> x, HeadCache& cache, DirectionFallback fallback) {
    const auto& c = model.config();
    const std::size_t de = c.encoder_dim();
    const std::size_t d = c.ball_dim;
    if (x.size() != de) throw InvalidInput("head input dimension mismatch");
    const auto head_dir = model.group("head_dir");
    const auto head_norm = model.group("head_norm");

    cache.input.assign(x.begin(), x.end());
    cache.dir_raw.resize(d);
    for (std::size_t i = 0; i < d; ++i) cache.dir_raw[i] = kernels::dot(head_dir.data() + i * de, x.data(), de);
    cache.norm_raw = kernels::dot(head_norm.data(), x.data(), de) + model.group("head_bias")[0];
    cache.point.resize(d);
    cache.random_direction = false;
    if (fallback.rng != nullptr && std::sqrt(kernels::squared_norm(cache.dir_raw.data(), d)) < ball::kDirectionGuard) {
        ball::random_unit_direction(cache.dir_raw, *fallback.rng);
        cache.random_direction = true;
    }
    cache.reparam = ball::reparam_into(cache.dir_raw, cache.norm_raw, cache.point);
}

void heads_backward(const SentModel& model, const HeadCache& cache, std::span<const double> upstream,
                    std::span<double> grad_params, std::span<double> grad_input) {
    const auto& c = model.config();
    const std::size_t de = c.encoder_dim();
    const std::size_t d = c.ball_dim;
    const auto& layout = model.layout();
    const auto head_dir = model.group("head_dir");
    const auto head_norm = model.group("head_norm");

    std::vector<double> g_dir(d, 0.0);
    double g_norm = 0.0;
    ball::reparam_backward(cache.dir_raw, cache.norm_raw, cache.reparam, upstream, g_dir, g_norm);

    if (!cache.random_direction) {
        auto gd = grad_params.subspan(layout.group("head_dir").offset, d * de);
        for (std::size_t i = 0; i < d; ++i) {
            if (g_dir[i] == 0.0) continue;
            kernels::axpy(g_dir[i], cache.input.data(), gd.data() + i * de, de);
            kernels::axpy(g_dir[i], head_dir.data() + i * de, grad_input.data(), de);
        }
    }
    if (g_norm != 0.0) {
        auto gn = grad_params.subspan(layout.group("head_norm").offset, de);
        kernels::axpy(g_norm, cache.input.data(), gn.data(), de);
        kernels::axpy(g_norm, head_norm.data(), grad_input.data(), de);
        grad_params[layout.group("head_bias").offset] += g_norm;
    }
}

// ---- Encoder -----------------------------------------------------------------

std::vector<double> encode_euclidean(const SentModel& model, std::span<const TokenId> tokens, EncoderCache* cache) {
    if (tokens.empty()) throw InvalidInput("cannot encode an empty sentence");
    const auto& c = model.config();
    check_ids(tokens, c.vocab_size);
    const std::size_t dh = c.hidden_dim;
    const std::size_t dw = c.word_dim;
    const auto table = model.group("input_embedding");
    const auto fwd = model.forward_gru();
    const auto bwd = model.backward_gru();
    const std::size_t n = tokens.size();

    std::vector<gru::StepCache> local_f;
    std::vector<gru::StepCache> local_b;
    auto& cf = cache ? cache->fwd : local_f;
    auto& cb = cache ? cache->bwd : local_b;
    cf.resize(n);
    cb.resize(n);

    std::vector<double> h(dh, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        gru::step(fwd, table.subspan(tokens[t] * dw, dw), h, cf[t]);
        h = cf[t].h;
    }
    std::vector<double> out(h);
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        gru::step(bwd, table.subspan(tokens[n - 1 - k] * dw, dw), h, cb[k]);
        h = cb[k].h;
    }
    out.insert(out.end(), h.begin(), h.end());
    return out;
}

ball::BallPoint encode(const SentModel& model, std::span<const TokenId> tokens) {
    HeadCache head;
    apply_heads(model, encode_euclidean(model, tokens), head);
    return ball::BallPoint::from_coords(head.point);
}

void encode_backward(const SentModel& model, std::span<const TokenId> tokens, const EncoderCache& cache,
                     std::span<const double> upstream, std::span<double> grad_params) {
    const auto& c = model.config();
    const std::size_t dh = c.hidden_dim;
    const std::size_t dw = c.word_dim;
    const std::size_t n = tokens.size();
    std::vector<double> g_enc(c.encoder_dim(), 0.0);
    heads_backward(model, cache.head, upstream, grad_params, g_enc);

    const std::size_t table_off = model.layout().group("input_embedding").offset;
    auto run = [&](const gru::Weights& w, std::string_view prefix, const std::vector<gru::StepCache>& steps,
                   std::size_t half, bool reversed) {
        auto grads = model.gru_grads(grad_params, prefix);
        std::vector<double> dh_cur(g_enc.begin() + static_cast<std::ptrdiff_t>(half * dh),
                                   g_enc.begin() + static_cast<std::ptrdiff_t>((half + 1) * dh));
        std::vector<double> dh_prev(dh);
        for (std::size_t k = n; k-- > 0;) {
            const TokenId tok = tokens[reversed ? n - 1 - k : k];
            gru::step_backward(w, steps[k], dh_cur, grads, grad_params.subspan(table_off + tok * dw, dw), dh_prev);
            std::swap(dh_cur, dh_prev);
        }
    };
    run(model.forward_gru(), "gru_fwd", cache.fwd, 0, false);
    run(model.backward_gru(), "gru_bwd", cache.bwd, 1, true);
}

std::vector<double> context_average(const SentModel& model, std::span<const TokenId> sentence, std::size_t t) {
    const auto& c = model.config();
    if (t >= sentence.size()) throw OutOfRange("context position outside the sentence");
    const std::size_t de = c.encoder_dim();
    const std::size_t K = c.context_window;
    const auto table = model.group("context_embedding");
    std::vector<double> avg(de, 0.0);
    std::size_t used = 0;
    for (std::size_t k = 1; k <= K; ++k) {
        if (t >= k) {
            kernels::axpy(1.0, table.data() + sentence[t - k] * de, avg.data(), de);
            ++used;
        }
        if (t + k < sentence.size()) {
            kernels::axpy(1.0, table.data() + sentence[t + k] * de, avg.data(), de);
            ++used;
        }
    }
    const double divisor = c.context_divisor == ContextDivisor::fixed ? static_cast<double>(2 * K)
                                                                      : static_cast<double>(std::max<std::size_t>(used, 1));
    for (double& x : avg) x /= divisor;
    return avg;
}

ball::BallPoint context_embed(const SentModel& model, std::span<const TokenId> sentence, std::size_t t) {
    check_ids(sentence, model.config().vocab_size);
    HeadCache head;
    apply_heads(model, context_average(model, sentence, t), head);
    return ball::BallPoint::from_coords(head.point);
}

ball::BallPoint output_embed(const SentModel& model, TokenId word) {
    const std::size_t de = model.config().encoder_dim();
    if (word >= model.config().vocab_size) throw InvalidInput("word id outside the vocabulary");
    HeadCache head;
    apply_heads(model, model.group("output_embedding").subspan(word * de, de), head);
    return ball::BallPoint::from_coords(head.point);
}

double word_logit(double lambda1, double lambda2, std::span<const double> v, std::span<const double> s,
                  std::span<const double> c, ball::Metric metric) {
    return -lambda1 * ball::distance(metric, v, s) - lambda2 * ball::distance(metric, v, c);
}

// ---- Batches -----------------------------------------------------------------

SentBatch make_batch(std::span<const corpus::Triple> triples, std::size_t vocab_size, std::size_t pad_to) {
    auto pack = [&](auto member) {
        PaddedSequences p;
        p.width = pad_to;
        for (const auto& t : triples) p.width = std::max(p.width, (t.*member).size());
        p.ids.assign(triples.size() * p.width, kPadId);
        for (std::size_t i = 0; i < triples.size(); ++i) {
            const auto& s = triples[i].*member;
            check_ids(s, vocab_size);
            std::copy(s.begin(), s.end(), p.ids.begin() + static_cast<std::ptrdiff_t>(i * p.width));
            p.lengths.push_back(s.size());
        }
        return p;
    };
    SentBatch b;
    b.source = pack(&corpus::Triple::source);
    b.prev = pack(&corpus::Triple::prev);
    b.next = pack(&corpus::Triple::next);
    return b;
}

Sampling Sampling::automatic(std::size_t vocab_size) {
    return vocab_size > 2048 ? sampled(512) : full();
}

// ---- Loss --------------------------------------------------------------------

namespace {

/// Candidate sets for the sampled softmax: one ascending id list per predicted
/// token, always containing the target.
struct Candidates {
    std::vector<TokenId> ids;
    std::vector<std::size_t> offsets{0};
};

struct ChunkOut {
    double loss = 0.0;
    std::vector<double> grad;
    std::vector<double> grad_points; // per realized output word
};

} // namespace

LossResult sent_loss(const SentModel& model, const SentBatch& batch, const LossOptions& opts) {
    const auto& cfg = model.config();
    const std::size_t V = cfg.vocab_size;
    const std::size_t d = cfg.ball_dim;
    const std::size_t de = cfg.encoder_dim();
    const bool full = opts.sampling.negatives == 0 || opts.sampling.negatives >= V - 1;
    const double lambda1 = model.lambda1();
    const double lambda2 = model.lambda2();
    const auto metric = cfg.metric;
    if (opts.threads < 1) throw InvalidInput("threads must be positive");
    const std::size_t B = batch.size();
    if (batch.prev.size() != B || batch.next.size() != B) throw InvalidInput("batch streams differ in size");

    // Sampled negatives, drawn sequentially so the set does not depend on the
    // thread count.
    std::mt19937_64 rng(opts.seed);
    Candidates cand;
    std::vector<std::size_t> token_base(B + 1, 0);
    for (std::size_t i = 0; i < B; ++i) token_base[i + 1] = token_base[i] + batch.prev.lengths[i] + batch.next.lengths[i];
    const std::size_t total_tokens = token_base[B];
    if (total_tokens == 0) throw InvalidInput("batch has no target tokens");

    std::vector<std::int64_t> slot(V, -1);
    std::vector<TokenId> realized;
    if (full) {
        realized.resize(V);
        std::iota(realized.begin(), realized.end(), TokenId{0});
        for (std::size_t w = 0; w < V; ++w) slot[w] = static_cast<std::int64_t>(w);
    } else {
        const std::size_t n = opts.sampling.negatives;
        std::uniform_int_distribution<TokenId> pick(0, static_cast<TokenId>(V - 1));
        std::unordered_set<TokenId> chosen;
        auto add_token = [&](TokenId target) {
            chosen.clear();
            chosen.insert(target);
            while (chosen.size() < n + 1) chosen.insert(pick(rng));
            const std::size_t start = cand.ids.size();
            cand.ids.insert(cand.ids.end(), chosen.begin(), chosen.end());
            std::sort(cand.ids.begin() + static_cast<std::ptrdiff_t>(start), cand.ids.end());
            cand.offsets.push_back(cand.ids.size());
        };
        for (std::size_t i = 0; i < B; ++i) {
            for (TokenId w : batch.prev.row(i)) add_token(w);
            for (TokenId w : batch.next.row(i)) add_token(w);
        }
        for (TokenId w : cand.ids) {
            if (slot[w] < 0) {
                slot[w] = static_cast<std::int64_t>(realized.size());
                realized.push_back(w);
            }
        }
    }

    // Realize the output-word points through the heads.
    const auto out_table = model.group("output_embedding");
    std::vector<HeadCache> word_heads(realized.size());
    std::vector<double> word_points(realized.size() * d);
    for (std::size_t k = 0; k < realized.size(); ++k) {
        apply_heads(model, out_table.subspan(realized[k] * de, de), word_heads[k], DirectionFallback{&rng});
        std::copy(word_heads[k].point.begin(), word_heads[k].point.end(), word_points.begin() + static_cast<std::ptrdiff_t>(k * d));
    }

    const std::size_t ctx_off = model.layout().group("context_embedding").offset;
    const std::size_t ll_off = model.layout().group("log_lambda").offset;
    const bool want_grad = opts.compute_grad;

    auto process = [&](std::size_t begin, std::size_t end, ChunkOut& out) {
        if (want_grad) {
            out.grad.assign(model.params().size(), 0.0);
            out.grad_points.assign(realized.size() * d, 0.0);
        }
        std::vector<double> logits;
        std::vector<ball::DistancePartials> ps;
        std::vector<ball::DistancePartials> pc;
        std::vector<double> gs(d);
        std::vector<double> gc(d);
        std::vector<double> gctx(de);
        EncoderCache enc;
        HeadCache ctx_head;
        for (std::size_t i = begin; i < end; ++i) {
            std::mt19937_64 local(mix_seed(opts.seed, i));
            DirectionFallback fallback{&local};
            const auto source = batch.source.row(i);
            apply_heads(model, encode_euclidean(model, source, &enc), enc.head, fallback);
            const auto s = std::span<const double>(enc.head.point);
            std::fill(gs.begin(), gs.end(), 0.0);
            std::size_t tok_index = token_base[i];

            for (const PaddedSequences* target : {&batch.prev, &batch.next}) {
                const auto sentence = target->row(i);
                for (std::size_t t = 0; t < sentence.size(); ++t, ++tok_index) {
                    const TokenId w_target = sentence[t];
                    apply_heads(model, context_average(model, sentence, t), ctx_head, fallback);
                    const auto c = std::span<const double>(ctx_head.point);

                    std::span<const TokenId> ids;
                    if (full) {
                        ids = std::span<const TokenId>(realized);
                    } else {
                        ids = std::span<const TokenId>(cand.ids).subspan(cand.offsets[tok_index],
                                                                         cand.offsets[tok_index + 1] - cand.offsets[tok_index]);
                    }
                    const std::size_t m = ids.size();
                    logits.resize(m);
                    ps.resize(m);
                    pc.resize(m);
                    double max_logit = -std::numeric_limits<double>::infinity();
                    std::size_t target_pos = m;
                    for (std::size_t j = 0; j < m; ++j) {
                        const auto v = std::span<const double>(word_points).subspan(static_cast<std::size_t>(slot[ids[j]]) * d, d);
                        ps[j] = ball::distance_partials(metric, v, s);
                        pc[j] = ball::distance_partials(metric, v, c);
                        logits[j] = -lambda1 * ps[j].distance - lambda2 * pc[j].distance;
                        max_logit = std::max(max_logit, logits[j]);
                        if (ids[j] == w_target) target_pos = j;
                    }
                    double sum = 0.0;
                    for (std::size_t j = 0; j < m; ++j) sum += std::exp(logits[j] - max_logit);
                    const double lse = max_logit + std::log(sum);
                    out.loss += lse - logits[target_pos];
                    if (!want_grad) continue;

                    std::fill(gc.begin(), gc.end(), 0.0);
                    double g_rho1 = 0.0;
                    double g_rho2 = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        const double q = std::exp(logits[j] - lse) - (j == target_pos ? 1.0 : 0.0);
                        if (q == 0.0) continue;
                        const std::size_t k = static_cast<std::size_t>(slot[ids[j]]);
                        const auto v = std::span<const double>(word_points).subspan(k * d, d);
                        auto gv = std::span<double>(out.grad_points).subspan(k * d, d);
                        ball::accumulate_partials(ps[j], -lambda1 * q, v, s, gv, gs);
                        ball::accumulate_partials(pc[j], -lambda2 * q, v, c, gv, gc);
                        g_rho1 += q * (-lambda1 * ps[j].distance);
                        g_rho2 += q * (-lambda2 * pc[j].distance);
                    }
                    out.grad[ll_off] += g_rho1;
                    out.grad[ll_off + 1] += g_rho2;

                    std::fill(gctx.begin(), gctx.end(), 0.0);
                    heads_backward(model, ctx_head, gc, out.grad, gctx);
                    const std::size_t K = cfg.context_window;
                    std::size_t used = 0;
                    for (std::size_t k = 1; k <= K; ++k) used += (t >= k) + (t + k < sentence.size());
                    const double divisor = cfg.context_divisor == ContextDivisor::fixed
                                               ? static_cast<double>(2 * K)
                                               : static_cast<double>(std::max<std::size_t>(used, 1));
                    for (std::size_t k = 1; k <= K; ++k) {
                        if (t >= k) kernels::axpy(1.0 / divisor, gctx.data(), out.grad.data() + ctx_off + sentence[t - k] * de, de);
                        if (t + k < sentence.size()) {
                            kernels::axpy(1.0 / divisor, gctx.data(), out.grad.data() + ctx_off + sentence[t + k] * de, de);
                        }
                    }
                }
            }
            if (want_grad) encode_backward(model, source, enc, gs, out.grad);
        }
    };

    const std::size_t nthreads = std::max<std::size_t>(1, std::min(opts.threads, B));
    std::vector<ChunkOut> chunks(nthreads);
    if (nthreads == 1) {
        process(0, B, chunks[0]);
    } else {
        const std::size_t per = (B + nthreads - 1) / nthreads;
        std::vector<std::exception_ptr> errors(nthreads);
        {
            std::vector<std::jthread> workers;
            for (std::size_t t = 0; t < nthreads; ++t) {
                workers.emplace_back([&, t] {
                    try {
                        process(std::min(B, t * per), std::min(B, (t + 1) * per), chunks[t]);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    LossResult result;
    result.tokens = total_tokens;
    for (const auto& ch : chunks) result.loss += ch.loss;
    result.loss /= static_cast<double>(total_tokens);
    if (!want_grad) return result;

    result.grad = std::move(chunks[0].grad);
    auto grad_points = std::move(chunks[0].grad_points);
    for (std::size_t t = 1; t < nthreads; ++t) {
        for (std::size_t i = 0; i < result.grad.size(); ++i) result.grad[i] += chunks[t].grad[i];
        for (std::size_t i = 0; i < grad_points.size(); ++i) grad_points[i] += chunks[t].grad_points[i];
    }
    const std::size_t out_off = model.layout().group("output_embedding").offset;
    for (std::size_t k = 0; k < realized.size(); ++k) {
        const auto gv = std::span<const double>(grad_points).subspan(k * d, d);
        if (std::all_of(gv.begin(), gv.end(), [](double x) { return x == 0.0; })) continue;
        heads_backward(model, word_heads[k], gv, result.grad,
                       std::span<double>(result.grad).subspan(out_off + realized[k] * de, de));
    }
    const double scale = 1.0 / static_cast<double>(total_tokens);
    for (double& g : result.grad) g *= scale;
    return result;
}

double perplexity_from_nll(double total_nll, std::size_t tokens) {
    if (tokens == 0) throw InvalidInput("perplexity needs at least one token");
    return std::exp(total_nll / static_cast<double>(tokens));
}

double perplexity(const SentModel& model, std::span<const corpus::Triple> heldout, std::size_t threads) {
    if (heldout.empty()) throw InvalidInput("perplexity needs a nonempty held-out set");
    constexpr std::size_t kChunk = 64;
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < heldout.size(); start += kChunk) {
        const auto part = heldout.subspan(start, std::min(kChunk, heldout.size() - start));
        const auto batch = make_batch(part, model.config().vocab_size);
        LossOptions opts;
        opts.sampling = Sampling::full();
        opts.threads = threads;
        opts.compute_grad = false;
        opts.seed = start;
        const auto r = sent_loss(model, batch, opts);
        total += r.loss * static_cast<double>(r.tokens);
        tokens += r.tokens;
    }
    return perplexity_from_nll(total, tokens);
}

// ---- Training ----------------------------------------------------------------

void TrainConfig::validate() const {
    model.validate();
    if (!(lr > 0.0)) throw InvalidInput("lr must be positive");
    if (!(lr_half_life > 0.0)) throw InvalidInput("lr half-life must be positive");
    if (batch_size < 1) throw InvalidInput("batch size must be positive");
    if (!(clip_norm > 0.0)) throw InvalidInput("clip norm must be positive");
    if (threads < 1) throw InvalidInput("threads must be positive");
}

Sampling TrainConfig::sampling() const {
    if (full_softmax) return Sampling::full();
    if (negatives > 0) return Sampling::sampled(negatives);
    return Sampling::automatic(model.vocab_size);
}

SentTrainResult train(std::span<const corpus::Triple> triples, const TrainConfig& config, const SentEpochCallback& on_epoch,
                      const SentStepCallback& on_step) {
    config.validate();
    if (triples.empty()) throw EmptyCorpus("no training triples");
    std::mt19937_64 rng(config.seed);
    SentTrainResult result;
    result.model = SentModel::initialize(config.model, config.init, rng);
    auto& model = result.model;
    optim::AdamState adam(model.params().size());
    const std::size_t threads = config.deterministic ? 1 : config.threads;
    const auto sampling = config.sampling();

    std::vector<std::size_t> order(triples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<corpus::Triple> batch_triples;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        SentEpochLog log;
        log.epoch = epoch;
        log.min_lambda = std::min(model.lambda1(), model.lambda2());
        double loss_sum = 0.0;
        std::size_t token_sum = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch_triples.clear();
            for (std::size_t i = start; i < end; ++i) batch_triples.push_back(triples[order[i]]);
            const auto batch = make_batch(batch_triples, config.model.vocab_size);
            if (batch.prev.lengths.empty()) continue;

            LossOptions opts;
            opts.sampling = sampling;
            opts.seed = rng();
            opts.threads = threads;
            auto r = sent_loss(model, batch, opts);
            loss_sum += r.loss * static_cast<double>(r.tokens);
            token_sum += r.tokens;

            std::vector<optim::GradBlock> blocks;
            for (const auto& g : model.layout().groups()) {
                blocks.push_back({g.name, std::span<double>(r.grad).subspan(g.offset, g.size())});
            }
            optim::clip_by_global_norm(blocks, config.clip_norm);
            optim::AdamHyper hyper;
            hyper.lr = optim::halving_decay(config.lr, result.steps, config.lr_half_life);
            optim::adam_step(model.params(), r.grad, adam, hyper);
            ++result.steps;
            ++log.steps;
            log.min_lambda = std::min({log.min_lambda, model.lambda1(), model.lambda2()});
            if (on_step) on_step(result.steps, model);
        }
        log.mean_loss = token_sum > 0 ? loss_sum / static_cast<double>(token_sum) : 0.0;
        log.lambda1 = model.lambda1();
        log.lambda2 = model.lambda2();
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.log.push_back(log);
        if (on_epoch && !on_epoch(log, model)) break;
    }
    return result;
}

// ---- Configuration and checkpoints ---------------------------------------

nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{
        {"vocab_size", c.model.vocab_size},
        {"word_dim", c.model.word_dim},
        {"hidden_dim", c.model.hidden_dim},
        {"ball_dim", c.model.ball_dim},
        {"layer_norm", c.model.layer_norm},
        {"context_window", c.model.context_window},
        {"context_divisor", std::string(to_string(c.model.context_divisor))},
        {"metric", std::string(ball::to_string(c.model.metric))},
        {"init_table_range", c.init.table_range},
        {"init_gru_range", c.init.gru_range},
        {"init_dir_head_range", c.init.dir_head_range},
        {"init_norm_head_range", c.init.norm_head_range},
        {"init_norm_head_bias", c.init.norm_head_bias},
        {"init_log_lambda", c.init.log_lambda},
        {"lr", c.lr},
        {"lr_half_life", c.lr_half_life},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"clip_norm", c.clip_norm},
        {"negatives", c.negatives},
        {"full_softmax", c.full_softmax},
        {"seed", c.seed},
        {"threads", c.threads},
        {"deterministic", c.deterministic},
    };
}

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("vocab_size", c.model.vocab_size);
    get("word_dim", c.model.word_dim);
    get("hidden_dim", c.model.hidden_dim);
    get("ball_dim", c.model.ball_dim);
    get("layer_norm", c.model.layer_norm);
    get("context_window", c.model.context_window);
    if (j.contains("context_divisor")) c.model.context_divisor = parse_context_divisor(j.at("context_divisor").get<std::string>());
    if (j.contains("metric")) c.model.metric = ball::parse_metric(j.at("metric").get<std::string>());
    get("init_table_range", c.init.table_range);
    get("init_gru_range", c.init.gru_range);
    get("init_dir_head_range", c.init.dir_head_range);
    get("init_norm_head_range", c.init.norm_head_range);
    get("init_norm_head_bias", c.init.norm_head_bias);
    get("init_log_lambda", c.init.log_lambda);
    get("lr", c.lr);
    get("lr_half_life", c.lr_half_life);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("clip_norm", c.clip_norm);
    get("negatives", c.negatives);
    get("full_softmax", c.full_softmax);
    get("seed", c.seed);
    get("threads", c.threads);
    get("deterministic", c.deterministic);
    return c;
}

void save_sent(const std::filesystem::path& prefix, const SentCheckpoint& ckpt) {
    const auto& m = ckpt.model;
    const auto& c = m.config();
    if (c.vocab_size != ckpt.vocab.size()) throw InvalidInput("model vocabulary size does not match the vocabulary");
    const auto paths = checkpoint::Paths::from_prefix(prefix);
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());

    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : m.layout().groups()) {
        groups.push_back({{"name", g.name}, {"offset", g.offset}, {"rows", g.rows}, {"cols", g.cols}});
    }
    nlohmann::json manifest{
        {"version", checkpoint::kFormatVersion},
        {"kind", "sentence"},
        {"dims", {{"vocab", c.vocab_size}, {"word", c.word_dim}, {"hidden", c.hidden_dim}, {"ball", c.ball_dim}}},
        {"flags",
         {{"layer_norm", c.layer_norm},
          {"context_window", c.context_window},
          {"context_divisor", std::string(to_string(c.context_divisor))},
          {"metric", std::string(ball::to_string(c.metric))}}},
        {"lambda", {m.lambda1(), m.lambda2()}},
        {"step", ckpt.step},
        {"vocab_hash", ckpt.vocab.hash()},
        {"dtype", "float32-le"},
        {"weights", paths.weights.filename().string()},
        {"vocab", paths.vocab.filename().string()},
        {"groups", groups},
        {"config", ckpt.config},
    };
    {
        std::ofstream out(paths.manifest, std::ios::trunc);
        if (!out) throw IoError("cannot write '" + paths.manifest.string() + "'");
        out << manifest.dump(2) << '\n';
    }
    {
        std::ofstream out(paths.weights, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + paths.weights.string() + "'");
        checkpoint::write_f32_le(out, m.params());
    }
    ckpt.vocab.save(paths.vocab);
}

SentCheckpoint load_sent(const std::filesystem::path& prefix) {
    const auto paths = checkpoint::Paths::from_prefix(prefix);
    nlohmann::json manifest;
    {
        std::ifstream in(paths.manifest);
        if (!in) throw IoError("cannot open '" + paths.manifest.string() + "'");
        try {
            in >> manifest;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed checkpoint manifest '" + paths.manifest.string() + "': " + e.what());
        }
    }
    if (manifest.value("kind", "") != "sentence") {
        throw CheckpointMismatch("'" + paths.manifest.string() + "' is not a sentence-model checkpoint");
    }
    if (manifest.value("version", 0) != checkpoint::kFormatVersion) throw CheckpointMismatch("unsupported checkpoint version");

    ModelConfig c;
    const auto& dims = manifest.at("dims");
    c.vocab_size = dims.at("vocab").get<std::size_t>();
    c.word_dim = dims.at("word").get<std::size_t>();
    c.hidden_dim = dims.at("hidden").get<std::size_t>();
    c.ball_dim = dims.at("ball").get<std::size_t>();
    const auto& flags = manifest.at("flags");
    c.layer_norm = flags.at("layer_norm").get<bool>();
    c.context_window = flags.at("context_window").get<std::size_t>();
    c.context_divisor = parse_context_divisor(flags.at("context_divisor").get<std::string>());
    c.metric = ball::parse_metric(flags.at("metric").get<std::string>());

    SentCheckpoint ckpt;
    ckpt.model = SentModel(c);
    ckpt.step = manifest.value("step", std::int64_t{0});
    ckpt.config = manifest.value("config", nlohmann::json::object());
    ckpt.vocab = corpus::Vocab::load(paths.vocab);
    if (ckpt.vocab.hash() != manifest.at("vocab_hash").get<std::string>()) {
        throw CheckpointMismatch("vocabulary file does not match the checkpoint's vocab hash");
    }
    if (ckpt.vocab.size() != c.vocab_size) throw CheckpointMismatch("checkpoint vocabulary size does not match its dims");
    const auto& groups = manifest.at("groups");
    const auto& expected = ckpt.model.layout().groups();
    if (groups.size() != expected.size()) throw CheckpointMismatch("checkpoint parameter groups do not match the model layout");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (groups[i].at("name").get<std::string>() != expected[i].name ||
            groups[i].at("offset").get<std::size_t>() != expected[i].offset ||
            groups[i].at("rows").get<std::size_t>() * groups[i].at("cols").get<std::size_t>() != expected[i].size()) {
            throw CheckpointMismatch("parameter group '" + expected[i].name + "' does not match the model layout");
        }
    }
    std::ifstream in(paths.weights, std::ios::binary);
    if (!in) throw IoError("cannot open '" + paths.weights.string() + "'");
    const auto values = checkpoint::read_f32_le(in, ckpt.model.params().size());
    std::copy(values.begin(), values.end(), ckpt.model.params().begin());
    return ckpt;
}

} // namespace hyptext::sent
