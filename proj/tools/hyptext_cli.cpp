// hyptext command-line interface.
//
// Every subcommand resolves its configuration as built-in defaults, then an
// optional JSON file given with --config, then explicit flags. The resolved
// object is written into the checkpoint manifest, echoed in the JSON report
// and saved as <out>.config.json, which --config accepts unchanged.
//
// Machine-readable results go to stdout; progress and diagnostics to stderr.

#include "hyptext/ball.hpp"
#include "hyptext/checkpoint.hpp"
#include "hyptext/corpus.hpp"
#include "hyptext/errors.hpp"
#include "hyptext/eval.hpp"
#include "hyptext/graph_embed.hpp"
#include "hyptext/sent_encoder.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace hyptext;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- Config plumbing ----------------------------------------------------------

/// Collects explicitly given flags as JSON keys and documents defaults in --help.
class FlagSet {
public:
    explicit FlagSet(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& flag, const std::string& key, const T& default_value, const std::string& help) {
        auto* o = app_->add_option_function<T>(flag, [this, key](const T& v) { overrides_[key] = v; }, help);
        o->default_str(json(default_value).dump());
        return o;
    }

    /// --name / --no-name pair for a boolean key.
    void add_bool(const std::string& name, const std::string& key, bool default_value, const std::string& help) {
        app_->add_flag_callback("--" + name, [this, key] { overrides_[key] = true; }, help + (default_value ? " (default)" : ""));
        app_->add_flag_callback("--no-" + name, [this, key] { overrides_[key] = false; },
                                "Disable: " + help + (default_value ? "" : " (default)"));
    }

    const json& overrides() const { return overrides_; }

private:
    CLI::App* app_;
    json overrides_ = json::object();
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidInput("malformed config file '" + path + "': " + e.what());
    }
}

/// defaults <- file <- flags, rejecting keys the subcommand does not know.
json resolve(json defaults, const std::string& config_path, const json& flags) {
    auto apply = [&defaults](const json& layer, const std::string& origin) {
        for (const auto& [key, value] : layer.items()) {
            if (!defaults.contains(key)) throw InvalidInput("unknown configuration key '" + key + "' in " + origin);
            defaults[key] = value;
        }
    };
    if (!config_path.empty()) apply(read_json_file(config_path), "'" + config_path + "'");
    apply(flags, "flags");
    return defaults;
}

void open_for_write(std::ofstream& out, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out.open(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out;
    open_for_write(out, path);
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), {}};
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string opt_string(const json& j, const char* key) { return j.at(key).is_null() ? std::string() : j.at(key).get<std::string>(); }

// ---- train-graph --------------------------------------------------------------

json graph_defaults() {
    json d = checkpoint::to_json(graph::TrainConfig{});
    d["edges"] = nullptr;
    d["corpus"] = nullptr;
    d["window"] = 5;
    d["downsample"] = 0.25;
    d["min_count"] = 5;
    d["max_types"] = 0;
    d["stopwords"] = nullptr;
    d["lowercase"] = true;
    d["letters_only"] = true;
    d["eval_every"] = 1;
    return d;
}

struct TrainGraphArgs {
    std::string config;
    std::string out;
    std::string epoch_csv;
};

int cmd_train_graph(const TrainGraphArgs& args, const json& flags) {
    const json cfg = resolve(graph_defaults(), args.config, flags);
    const auto edges_path = opt_string(cfg, "edges");
    const auto corpus_path = opt_string(cfg, "corpus");
    if (edges_path.empty() == corpus_path.empty()) throw InvalidInput("give exactly one of --edges or --corpus");
    const auto train_config = checkpoint::graph_config_from_json(cfg);
    train_config.validate();

    std::optional<corpus::EdgeList> edges;
    std::optional<corpus::CoocGraph> cooc;
    if (!edges_path.empty()) {
        edges = corpus::load_edge_list(edges_path);
        std::cerr << "edge list " << edges_path << ": " << edges->nodes.size() << " nodes, " << edges->edges.size() << " edges\n";
    } else {
        const corpus::TokenizeOptions topts{cfg.at("lowercase").get<bool>(), cfg.at("letters_only").get<bool>()};
        const auto tokens = corpus::tokenize(read_text(corpus_path), topts);
        const auto stop_path = opt_string(cfg, "stopwords");
        const auto stop = stop_path.empty() ? corpus::default_stopwords() : corpus::load_stopwords(stop_path);
        const corpus::CoocOptions copts{cfg.at("window").get<std::size_t>(), cfg.at("downsample").get<double>(),
                                        cfg.at("min_count").get<std::uint64_t>(), cfg.at("max_types").get<std::size_t>()};
        cooc = corpus::build_cooc(tokens, copts, stop);
        std::cerr << "corpus " << corpus_path << ": " << tokens.size() << " tokens, " << cooc->vocab.size() << " types, "
                  << cooc->edges.size() << " co-occurrence edges, " << cooc->epoch_draws() << " draws per epoch\n";
    }

    std::ofstream csv;
    if (!args.epoch_csv.empty()) {
        open_for_write(csv, args.epoch_csv);
        csv << "epoch,mean_loss,steps,seconds,degenerate_pairs,mean_rank,map\n";
    }
    const auto eval_every = cfg.at("eval_every").get<std::size_t>();
    json epochs = json::array();
    auto on_epoch = [&](const graph::EpochLog& log, const graph::ReparamTable& table) {
        json row{{"epoch", log.epoch}, {"mean_loss", log.mean_loss}, {"steps", log.steps}, {"seconds", log.seconds}};
        std::string rank_cols = ",";
        if (edges && eval_every > 0 && log.epoch % eval_every == 0) {
            const auto pts = table.realize_all();
            const auto r = eval::reconstruction({pts, table.dim()}, edges->edges, train_config.metric, train_config.threads);
            row["mean_rank"] = r.mean_rank;
            row["map"] = r.map;
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.mean_rank, r.map);
            rank_cols = buf;
        }
        if (csv.is_open()) {
            csv << log.epoch << ',' << log.mean_loss << ',' << log.steps << ',' << log.seconds << ',' << log.degenerate_pairs << ','
                << rank_cols << '\n';
            csv.flush();
        }
        std::cerr << "epoch " << log.epoch << " loss " << log.mean_loss;
        if (row.contains("map")) std::cerr << " mean_rank " << row["mean_rank"].get<double>() << " map " << row["map"].get<double>();
        std::cerr << " (" << log.seconds << " s)\n";
        epochs.push_back(row);
    };

    const auto result = edges ? graph::train(*edges, train_config, on_epoch) : graph::train(*cooc, train_config, on_epoch);
    const auto& vocab = edges ? edges->nodes : cooc->vocab;
    checkpoint::save_graph(args.out, {result.table, vocab, train_config.metric, result.steps, cfg});
    write_text(args.out + ".config.json", cfg.dump(2) + "\n");

    json report{{"checkpoint", args.out}, {"steps", result.steps}, {"epochs", epochs}, {"config", cfg}};
    if (edges) {
        const auto pts = result.table.realize_all();
        const auto r = eval::reconstruction({pts, result.table.dim()}, edges->edges, train_config.metric, train_config.threads);
        report["metrics"] = {{"mean_rank", r.mean_rank}, {"map", r.map}};
    } else {
        const auto pts = result.table.realize_all();
        report["metrics"] = {{"norm_freq_rho", eval::norm_freq_corr({pts, result.table.dim()}, cooc->vocab.counts())}};
    }
    emit(report);
    return 0;
}

// ---- train-sent ---------------------------------------------------------------

json sent_defaults() {
    json d = sent::to_json(sent::TrainConfig{});
    d.erase("vocab_size"); // derived from the corpus
    d["corpus"] = nullptr;
    d["augment"] = false;
    d["augment_seed"] = 1234;
    d["heldout_fraction"] = 0.1;
    d["max_types"] = 20000;
    d["min_count"] = 1;
    d["lowercase"] = true;
    d["letters_only"] = true;
    return d;
}

struct TrainSentArgs {
    std::string config;
    std::string out;
    std::string epoch_csv;
};

int cmd_train_sent(const TrainSentArgs& args, const json& flags) {
    const json cfg = resolve(sent_defaults(), args.config, flags);
    const auto corpus_path = opt_string(cfg, "corpus");
    if (corpus_path.empty()) throw InvalidInput("--corpus is required");

    std::ifstream in(corpus_path);
    if (!in) throw IoError("cannot open '" + corpus_path + "'");
    const auto sentences = corpus::read_sentences(in, {cfg.at("lowercase").get<bool>(), cfg.at("letters_only").get<bool>()});
    const auto heldout_fraction = cfg.at("heldout_fraction").get<double>();
    if (heldout_fraction < 0 || heldout_fraction >= 1) throw InvalidInput("--heldout-fraction must lie in [0, 1)");
    const auto split = sentences.size() - static_cast<std::size_t>(static_cast<double>(sentences.size()) * heldout_fraction);

    std::vector<std::string> train_tokens;
    for (std::size_t i = 0; i < split; ++i) train_tokens.insert(train_tokens.end(), sentences[i].begin(), sentences[i].end());
    const auto vocab =
        corpus::build_vocab(train_tokens, {cfg.at("max_types").get<std::size_t>(), cfg.at("min_count").get<std::uint64_t>(), true});

    std::vector<corpus::Sentence> train_ids, heldout_ids;
    for (std::size_t i = 0; i < sentences.size(); ++i) (i < split ? train_ids : heldout_ids).push_back(corpus::to_ids(sentences[i], vocab));
    const auto triples =
        corpus::extract_triples(train_ids, {cfg.at("augment").get<bool>(), cfg.at("augment_seed").get<std::uint64_t>()});
    const auto heldout = heldout_ids.size() >= 3 ? corpus::extract_triples(heldout_ids, {}) : std::vector<corpus::Triple>{};

    auto model_cfg = cfg;
    model_cfg["vocab_size"] = vocab.size();
    const auto train_config = sent::config_from_json(model_cfg);
    train_config.validate();
    std::cerr << "corpus " << corpus_path << ": " << sentences.size() << " sentences, " << vocab.size() << " types, " << triples.size()
              << " training triples, " << heldout.size() << " held-out triples\n";

    std::ofstream csv;
    if (!args.epoch_csv.empty()) {
        open_for_write(csv, args.epoch_csv);
        csv << "epoch,mean_loss,lambda1,lambda2,min_lambda,steps,seconds,heldout_perplexity\n";
    }
    const std::size_t threads = train_config.deterministic ? 1 : train_config.threads;
    json epochs = json::array();
    auto on_epoch = [&](const sent::SentEpochLog& log, const sent::SentModel& model) {
        json row{{"epoch", log.epoch},       {"mean_loss", log.mean_loss}, {"lambda1", log.lambda1}, {"lambda2", log.lambda2},
                 {"min_lambda", log.min_lambda}, {"steps", log.steps},      {"seconds", log.seconds}};
        std::string ppl_col;
        if (!heldout.empty()) {
            const double ppl = sent::perplexity(model, heldout, threads);
            row["heldout_perplexity"] = ppl;
            ppl_col = std::to_string(ppl);
        }
        if (csv.is_open()) {
            csv << log.epoch << ',' << log.mean_loss << ',' << log.lambda1 << ',' << log.lambda2 << ',' << log.min_lambda << ','
                << log.steps << ',' << log.seconds << ',' << ppl_col << '\n';
            csv.flush();
        }
        std::cerr << "epoch " << log.epoch << " loss " << log.mean_loss << " lambda " << log.lambda1 << "/" << log.lambda2;
        if (!ppl_col.empty()) std::cerr << " held-out perplexity " << ppl_col;
        std::cerr << " (" << log.seconds << " s)\n";
        epochs.push_back(row);
        return true;
    };
    const auto result = sent::train(triples, train_config, on_epoch);
    sent::save_sent(args.out, {result.model, vocab, result.steps, cfg});
    write_text(args.out + ".config.json", cfg.dump(2) + "\n");

    json report{{"checkpoint", args.out},
                {"steps", result.steps},
                {"epochs", epochs},
                {"lambda", {result.model.lambda1(), result.model.lambda2()}},
                {"config", cfg}};
    if (!heldout.empty()) report["metrics"] = {{"heldout_perplexity", sent::perplexity(result.model, heldout, threads)}};
    emit(report);
    return 0;
}

// ---- Checkpoint access --------------------------------------------------------

std::string checkpoint_kind(const std::string& prefix) {
    const auto manifest = checkpoint::Paths::from_prefix(prefix).manifest;
    const auto j = read_json_file(manifest.string());
    return j.value("kind", "");
}

struct WordTable {
    std::vector<double> points;
    std::size_t dim = 0;
    corpus::Vocab vocab;
    ball::Metric metric = ball::Metric::hyperbolic;
    json config;

    eval::EmbeddingView view() const { return {points, dim}; }
};

WordTable load_word_table(const std::string& prefix) {
    const auto kind = checkpoint_kind(prefix);
    if (kind != "graph") throw CheckpointMismatch("'" + prefix + "' is a " + kind + " checkpoint; this task needs a graph checkpoint");
    auto ck = checkpoint::load_graph(prefix);
    return {ck.table.realize_all(), ck.table.dim(), std::move(ck.vocab), ck.metric, std::move(ck.config)};
}

corpus::TokenId require_token(const corpus::Vocab& vocab, const std::string& token, const std::string& what) {
    const auto id = vocab.find(token);
    if (!id) throw CheckpointMismatch(what + " '" + token + "' is not in the checkpoint vocabulary");
    return *id;
}

// ---- eval ---------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string task;
    std::string edges;
    std::string pairs;
    std::string trees;
    std::string corpus;
    double alpha = 1000.0;
    std::size_t threads = 1;
};

int cmd_eval(const EvalArgs& a) {
    eval::EvalReport report;
    json cfg{{"checkpoint", a.checkpoint}, {"task", a.task}, {"threads", a.threads}};
    auto require = [](const std::string& value, const char* flag) {
        if (value.empty()) throw InvalidInput(std::string(flag) + " is required for this task");
    };

    if (a.task == "reconstruction") {
        require(a.edges, "--edges");
        const auto table = load_word_table(a.checkpoint);
        const auto el = corpus::load_edge_list(a.edges);
        std::vector<std::pair<corpus::TokenId, corpus::TokenId>> mapped;
        for (auto [u, v] : el.edges) {
            mapped.push_back({require_token(table.vocab, el.nodes.token(u), "node"), require_token(table.vocab, el.nodes.token(v), "node")});
        }
        const auto r = eval::reconstruction(table.view(), mapped, table.metric, a.threads);
        report.set_metric("mean_rank", r.mean_rank);
        report.set_metric("map", r.map);
        report.set_note("mean_rank", "pooled over all (parent, child) pairs");
        report.set_dataset("edges", a.edges);
        cfg["edges"] = a.edges;
    } else if (a.task == "wordsim" || a.task == "hyperlex") {
        require(a.pairs, "--pairs");
        const auto table = load_word_table(a.checkpoint);
        const auto pairs = eval::load_scored_pairs(a.pairs);
        const auto r = a.task == "wordsim" ? eval::wordsim_eval(table.view(), table.vocab, pairs)
                                           : eval::hyperlex_eval(table.view(), table.vocab, pairs, a.alpha);
        report.set_metric("rho", r.rho);
        report.set_metric("pairs_used", static_cast<double>(r.used));
        report.set_metric("pairs_skipped", static_cast<double>(r.skipped));
        report.set_dataset("pairs", a.pairs);
        cfg["pairs"] = a.pairs;
        if (a.task == "hyperlex") {
            report.set_note("alpha", std::to_string(a.alpha));
            cfg["alpha"] = a.alpha;
        }
    } else if (a.task == "norm-freq") {
        const auto table = load_word_table(a.checkpoint);
        report.set_metric("rho", eval::norm_freq_corr(table.view(), table.vocab.counts()));
        report.set_note("correlation", "spearman(1/frequency, hyperbolic norm)");
    } else if (a.task == "tree-height" || a.task == "perplexity") {
        const auto kind = checkpoint_kind(a.checkpoint);
        if (kind != "sentence") throw CheckpointMismatch("'" + a.checkpoint + "' is a " + kind + " checkpoint; this task needs a sentence checkpoint");
        const auto ck = sent::load_sent(a.checkpoint);
        const corpus::TokenizeOptions topts{ck.config.value("lowercase", true), ck.config.value("letters_only", true)};
        if (a.task == "tree-height") {
            require(a.trees, "--trees");
            const auto trees = corpus::load_trees(a.trees);
            auto encoder = [&](const std::vector<std::string>& span) {
                corpus::Sentence ids;
                for (const auto& w : span) {
                    for (const auto& piece : corpus::tokenize(w, topts)) ids.push_back(ck.vocab.id_or_unk(piece));
                }
                const auto p = sent::encode(ck.model, ids);
                return std::vector<double>(p.coords().begin(), p.coords().end());
            };
            const auto r = eval::tree_height_corr(encoder, trees);
            report.set_metric("rho", r.rho);
            report.set_metric("n_nodes", static_cast<double>(r.nodes));
            report.set_note("height_convention", "leaves=0");
            report.set_dataset("trees", a.trees);
            cfg["trees"] = a.trees;
        } else {
            require(a.corpus, "--corpus");
            std::ifstream in(a.corpus);
            if (!in) throw IoError("cannot open '" + a.corpus + "'");
            const auto sentences = corpus::read_sentences(in, topts);
            std::vector<corpus::Sentence> ids;
            for (const auto& s : sentences) ids.push_back(corpus::to_ids(s, ck.vocab));
            const auto triples = corpus::extract_triples(ids, {});
            report.set_metric("perplexity", sent::perplexity(ck.model, triples, a.threads));
            report.set_metric("triples", static_cast<double>(triples.size()));
            report.set_dataset("corpus", a.corpus);
            cfg["corpus"] = a.corpus;
        }
    } else {
        throw InvalidInput("unknown task '" + a.task + "'");
    }
    report.set_config(cfg);
    emit(report.to_json());
    return 0;
}

// ---- neighbors / export -------------------------------------------------------

int cmd_neighbors(const std::string& prefix, const std::string& query, std::size_t k, const std::string& metric) {
    const auto table = load_word_table(prefix);
    const auto id = table.vocab.find(query);
    if (!id) throw OutOfRange("query '" + query + "' is not in the vocabulary");
    for (const auto& n : eval::nearest_neighbors(table.view(), *id, k, eval::parse_neighbor_metric(metric))) {
        std::printf("%s\t%.9g\n", table.vocab.token(n.id).c_str(), n.score);
    }
    return 0;
}

int cmd_export(const std::string& prefix, const std::string& out_path) {
    const auto kind = checkpoint_kind(prefix);
    if (kind != "graph") throw CheckpointMismatch("export needs a graph checkpoint; '" + prefix + "' is " + kind);
    const auto ck = checkpoint::load_graph(prefix);
    if (out_path.empty() || out_path == "-") {
        checkpoint::export_tsv(std::cout, ck.table, ck.vocab);
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw IoError("cannot write '" + out_path + "'");
        checkpoint::export_tsv(out, ck.table, ck.vocab);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poincare-ball embeddings of graphs, words and sentences"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // train-graph
    auto* tg = app.add_subcommand("train-graph", "Train a lookup table on an edge list or a co-occurrence graph");
    FlagSet tg_flags(tg);
    TrainGraphArgs tg_args;
    {
        const graph::TrainConfig d;
        tg->add_option("--config", tg_args.config, "JSON config file (keys as in the echoed config)");
        tg->add_option("--out", tg_args.out, "Checkpoint prefix")->required();
        tg->add_option("--epoch-csv", tg_args.epoch_csv, "Per-epoch CSV log (loss; mean rank and MAP in edge mode)");
        tg_flags.add<std::string>("--edges", "edges", "", "Edge list, one 'parent<TAB>child' per line");
        tg_flags.add<std::string>("--corpus", "corpus", "", "Raw text corpus for co-occurrence mode");
        tg_flags.add<std::size_t>("--dim", "dim", d.dim, "Embedding dimension d");
        tg_flags.add<std::size_t>("--batch-size", "batch_size", d.batch_size, "Positives per step");
        tg_flags.add<double>("--lr", "lr", d.lr, "Adam learning rate");
        tg_flags.add<std::size_t>("--epochs", "epochs", d.epochs, "Training epochs");
        tg_flags.add<std::size_t>("--negatives", "num_negatives", d.num_negatives, "Negatives per positive");
        tg_flags.add<double>("--clip-norm", "clip_norm", d.clip_norm, "Global gradient-norm clip");
        tg_flags.add<std::uint64_t>("--seed", "seed", d.seed, "Random seed");
        tg_flags.add<double>("--init-dir-range", "init_dir_range", d.init_dir_range, "Direction init U[-r, r]");
        tg_flags.add<double>("--init-norm-value", "init_norm_value", d.init_norm_value, "Pre-sigmoid norm init centre");
        tg_flags.add<double>("--init-norm-jitter", "init_norm_jitter", d.init_norm_jitter, "Pre-sigmoid norm init jitter");
        tg_flags.add<std::string>("--metric", "metric", "hyperbolic", "Distance in the loss: hyperbolic | euclidean");
        tg_flags.add<std::size_t>("--rejection-attempts", "rejection_attempts", d.rejection_attempts, "Draws per negative slot");
        tg_flags.add<std::size_t>("--burn-in-epochs", "burn_in_epochs", d.burn_in_epochs, "Epochs at lr/10 before training");
        tg_flags.add<std::size_t>("--threads", "threads", d.threads, "Worker threads");
        tg_flags.add_bool("deterministic", "deterministic", d.deterministic, "Sequential reductions for bit-identical reruns");
        tg_flags.add<std::size_t>("--window", "window", 5, "Co-occurrence window (tokens)");
        tg_flags.add<double>("--downsample", "downsample", 0.25, "Edge weight exponent c in f^c");
        tg_flags.add<std::uint64_t>("--min-count", "min_count", 5, "Drop rarer types before windowing");
        tg_flags.add<std::size_t>("--max-types", "max_types", 0, "Vocabulary cap (0 = unlimited)");
        tg_flags.add<std::string>("--stopwords", "stopwords", "", "Stopword file (default: built-in English list)");
        tg_flags.add_bool("lowercase", "lowercase", true, "Lowercase the corpus");
        tg_flags.add_bool("letters-only", "letters_only", true, "Replace non a-z bytes with spaces");
        tg_flags.add<std::size_t>("--eval-every", "eval_every", 1, "Reconstruction every N epochs in edge mode (0 = off)");
    }

    // train-sent
    auto* ts = app.add_subcommand("train-sent", "Train the sentence encoder on a one-sentence-per-line corpus");
    FlagSet ts_flags(ts);
    TrainSentArgs ts_args;
    {
        const sent::TrainConfig d;
        ts->add_option("--config", ts_args.config, "JSON config file (keys as in the echoed config)");
        ts->add_option("--out", ts_args.out, "Checkpoint prefix")->required();
        ts->add_option("--epoch-csv", ts_args.epoch_csv, "Per-epoch CSV log");
        ts_flags.add<std::string>("--corpus", "corpus", "", "One sentence per line");
        ts_flags.add<std::size_t>("--word-dim", "word_dim", d.model.word_dim, "Input word embedding width");
        ts_flags.add<std::size_t>("--hidden-dim", "hidden_dim", d.model.hidden_dim, "GRU state width per direction");
        ts_flags.add<std::size_t>("--encoder-dim", "ball_dim", d.model.ball_dim, "Sentence embedding dimension in the ball");
        ts_flags.add_bool("layer-norm", "layer_norm", d.model.layer_norm, "Layer normalization inside the GRU");
        ts_flags.add<std::size_t>("--context-window", "context_window", d.model.context_window, "Local context K");
        ts_flags.add<std::string>("--context-divisor", "context_divisor", "fixed", "fixed (1/2K) | available");
        ts_flags.add<std::string>("--metric", "metric", "hyperbolic", "hyperbolic | euclidean");
        ts_flags.add<double>("--lr", "lr", d.lr, "Adam learning rate");
        ts_flags.add<double>("--lr-half-life", "lr_half_life", d.lr_half_life, "Steps per halving of the learning rate");
        ts_flags.add<std::size_t>("--batch-size", "batch_size", d.batch_size, "Triples per step");
        ts_flags.add<std::size_t>("--epochs", "epochs", d.epochs, "Training epochs");
        ts_flags.add<double>("--clip-norm", "clip_norm", d.clip_norm, "Global gradient-norm clip");
        ts_flags.add<std::size_t>("--negatives", "negatives", d.negatives, "Sampled softmax size (0 = automatic)");
        ts_flags.add_bool("full-softmax", "full_softmax", d.full_softmax, "Always use the full softmax");
        ts_flags.add<std::uint64_t>("--seed", "seed", d.seed, "Random seed");
        ts_flags.add<std::size_t>("--threads", "threads", d.threads, "Worker threads");
        ts_flags.add_bool("deterministic", "deterministic", d.deterministic, "Sequential reductions for bit-identical reruns");
        ts_flags.add_bool("augment", "augment", false, "Add random-span triples");
        ts_flags.add<std::uint64_t>("--augment-seed", "augment_seed", 1234, "Seed for span augmentation");
        ts_flags.add<double>("--heldout-fraction", "heldout_fraction", 0.1, "Trailing share of sentences held out");
        ts_flags.add<std::size_t>("--max-types", "max_types", 20000, "Vocabulary cap (rest maps to UNK)");
        ts_flags.add<std::uint64_t>("--min-count", "min_count", 1, "Minimum type count");
        ts_flags.add_bool("lowercase", "lowercase", true, "Lowercase the corpus");
        ts_flags.add_bool("letters-only", "letters_only", true, "Replace non a-z bytes with spaces");
    }

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; prints an EvalReport as JSON");
    EvalArgs ev_args;
    ev->add_option("--checkpoint", ev_args.checkpoint, "Checkpoint prefix")->required();
    ev->add_option("--task", ev_args.task, "reconstruction | wordsim | hyperlex | norm-freq | tree-height | perplexity")
        ->required()
        ->check(CLI::IsMember({"reconstruction", "wordsim", "hyperlex", "norm-freq", "tree-height", "perplexity"}));
    ev->add_option("--edges", ev_args.edges, "Edge list for reconstruction");
    ev->add_option("--pairs", ev_args.pairs, "word1<TAB>word2<TAB>score file for wordsim/hyperlex");
    ev->add_option("--trees", ev_args.trees, "Bracketed parse trees for tree-height");
    ev->add_option("--corpus", ev_args.corpus, "Held-out sentences for perplexity");
    ev->add_option("--alpha", ev_args.alpha, "HyperLex norm weight")->capture_default_str();
    ev->add_option("--threads", ev_args.threads, "Worker threads")->capture_default_str();

    // neighbors
    auto* nb = app.add_subcommand("neighbors", "k nearest neighbours of a token as TSV");
    std::string nb_ckpt, nb_query, nb_metric = "cosine";
    std::size_t nb_k = 10;
    nb->add_option("--checkpoint", nb_ckpt, "Checkpoint prefix")->required();
    nb->add_option("--query", nb_query, "Query token")->required();
    nb->add_option("-k,--k", nb_k, "Number of neighbours")->capture_default_str();
    nb->add_option("--metric", nb_metric, "cosine | hyperbolic")->capture_default_str();

    // export
    auto* ex = app.add_subcommand("export", "Realized points as 'token<TAB>x1..xd<TAB>norm' TSV");
    std::string ex_ckpt, ex_out;
    ex->add_option("--checkpoint", ex_ckpt, "Checkpoint prefix")->required();
    ex->add_option("--out", ex_out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*tg) return cmd_train_graph(tg_args, tg_flags.overrides());
        if (*ts) return cmd_train_sent(ts_args, ts_flags.overrides());
        if (*ev) return cmd_eval(ev_args);
        if (*nb) return cmd_neighbors(nb_ckpt, nb_query, nb_k, nb_metric);
        if (*ex) return cmd_export(ex_ckpt, ex_out);
    } catch (const hyptext::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: bad configuration value: " << e.what() << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
