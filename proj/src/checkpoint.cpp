#include "hyptext/checkpoint.hpp"

#include "hyptext/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace hyptext::checkpoint {

namespace {

std::uint32_t to_le(std::uint32_t x) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((x & 0xffU) << 24) | ((x & 0xff00U) << 8) | ((x >> 8) & 0xff00U) | (x >> 24);
    }
    return x;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    return in;
}

} // namespace

void write_f32_le(std::ostream& out, std::span<const double> values) {
    std::vector<std::uint32_t> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        buf[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
    if (!out) throw IoError("failed writing float32 array");
}

std::vector<double> read_f32_le(std::istream& in, std::size_t count) {
    std::vector<std::uint32_t> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(std::uint32_t)) {
        throw IoError("float32 array truncated: expected " + std::to_string(count) + " values");
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(to_le(buf[i]));
    return out;
}

Paths Paths::from_prefix(const std::filesystem::path& prefix) {
    const std::string p = prefix.string();
    return Paths{p + ".json", p + ".bin", p + ".vocab.tsv"};
}

nlohmann::json to_json(const graph::TrainConfig& c) {
    return nlohmann::json{
        {"dim", c.dim},
        {"batch_size", c.batch_size},
        {"lr", c.lr},
        {"epochs", c.epochs},
        {"num_negatives", c.num_negatives},
        {"clip_norm", c.clip_norm},
        {"seed", c.seed},
        {"init_dir_range", c.init_dir_range},
        {"init_norm_value", c.init_norm_value},
        {"init_norm_jitter", c.init_norm_jitter},
        {"metric", std::string(ball::to_string(c.metric))},
        {"rejection_attempts", c.rejection_attempts},
        {"burn_in_epochs", c.burn_in_epochs},
        {"threads", c.threads},
        {"deterministic", c.deterministic},
    };
}

graph::TrainConfig graph_config_from_json(const nlohmann::json& j, graph::TrainConfig c) {
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("dim", c.dim);
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("epochs", c.epochs);
    get("num_negatives", c.num_negatives);
    get("clip_norm", c.clip_norm);
    get("seed", c.seed);
    get("init_dir_range", c.init_dir_range);
    get("init_norm_value", c.init_norm_value);
    get("init_norm_jitter", c.init_norm_jitter);
    if (j.contains("metric")) c.metric = ball::parse_metric(j.at("metric").get<std::string>());
    get("rejection_attempts", c.rejection_attempts);
    get("burn_in_epochs", c.burn_in_epochs);
    get("threads", c.threads);
    get("deterministic", c.deterministic);
    return c;
}

void save_graph(const std::filesystem::path& prefix, const GraphCheckpoint& ckpt) {
    if (ckpt.table.rows() != ckpt.vocab.size()) throw InvalidInput("checkpoint table rows do not match vocabulary size");
    const auto paths = Paths::from_prefix(prefix);
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());

    nlohmann::json manifest{
        {"version", kFormatVersion},
        {"kind", "graph"},
        {"dim", ckpt.table.dim()},
        {"rows", ckpt.table.rows()},
        {"metric", std::string(ball::to_string(ckpt.metric))},
        {"vocab_hash", ckpt.vocab.hash()},
        {"step", ckpt.step},
        {"dtype", "float32-le"},
        {"weights", paths.weights.filename().string()},
        {"vocab", paths.vocab.filename().string()},
        {"config", ckpt.config},
    };
    {
        auto out = open_out(paths.manifest);
        out << manifest.dump(2) << '\n';
    }
    {
        auto out = open_out(paths.weights);
        write_f32_le(out, ckpt.table.data());
    }
    ckpt.vocab.save(paths.vocab);
}

GraphCheckpoint load_graph(const std::filesystem::path& prefix) {
    const auto paths = Paths::from_prefix(prefix);
    nlohmann::json manifest;
    {
        auto in = open_in(paths.manifest);
        try {
            in >> manifest;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed checkpoint manifest '" + paths.manifest.string() + "': " + e.what());
        }
    }
    if (manifest.value("kind", "") != "graph") throw CheckpointMismatch("'" + paths.manifest.string() + "' is not a graph checkpoint");
    if (manifest.value("version", 0) != kFormatVersion) throw CheckpointMismatch("unsupported checkpoint version");

    GraphCheckpoint ckpt;
    ckpt.metric = ball::parse_metric(manifest.at("metric").get<std::string>());
    ckpt.step = manifest.value("step", std::int64_t{0});
    ckpt.config = manifest.value("config", nlohmann::json::object());
    ckpt.vocab = corpus::Vocab::load(paths.vocab);
    if (ckpt.vocab.hash() != manifest.at("vocab_hash").get<std::string>()) {
        throw CheckpointMismatch("vocabulary file does not match the checkpoint's vocab hash");
    }
    const auto dim = manifest.at("dim").get<std::size_t>();
    const auto rows = manifest.at("rows").get<std::size_t>();
    if (rows != ckpt.vocab.size()) throw CheckpointMismatch("checkpoint row count does not match its vocabulary");
    ckpt.table = graph::ReparamTable(rows, dim);
    auto in = open_in(paths.weights);
    const auto values = read_f32_le(in, rows * (dim + 1));
    std::copy(values.begin(), values.end(), ckpt.table.data().begin());
    return ckpt;
}

void export_tsv(std::ostream& out, const graph::ReparamTable& table, const corpus::Vocab& vocab) {
    if (table.rows() != vocab.size()) throw InvalidInput("table rows do not match vocabulary size");
    std::vector<double> p(table.dim());
    const auto old_flags = out.flags();
    const auto old_precision = out.precision();
    out << std::setprecision(9);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        table.embed_into(r, p);
        out << vocab.token(static_cast<corpus::TokenId>(r));
        for (double x : p) out << '\t' << x;
        out << '\t' << ball::hyperbolic_norm(p) << '\n';
    }
    out.flags(old_flags);
    out.precision(old_precision);
}

} // namespace hyptext::checkpoint
