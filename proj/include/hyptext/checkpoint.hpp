#pragma once

#include "hyptext/ball.hpp"
#include "hyptext/corpus.hpp"
#include "hyptext/graph_embed.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace hyptext::checkpoint {

inline constexpr int kFormatVersion = 1;

/// Little-endian IEEE-754 binary32, regardless of host byte order.
void write_f32_le(std::ostream& out, std::span<const double> values);
std::vector<double> read_f32_le(std::istream& in, std::size_t count);

/// <prefix>.json, <prefix>.bin, <prefix>.vocab.tsv
struct Paths {
    std::filesystem::path manifest;
    std::filesystem::path weights;
    std::filesystem::path vocab;

    static Paths from_prefix(const std::filesystem::path& prefix);
};

struct GraphCheckpoint {
    graph::ReparamTable table;
    corpus::Vocab vocab;
    ball::Metric metric = ball::Metric::hyperbolic;
    std::int64_t step = 0;
    nlohmann::json config; // fully-resolved run configuration
};

/// Manifest {version, kind, dim, rows, metric, vocab_hash, step, config}
/// plus the raw table rows as float32 in id order.
void save_graph(const std::filesystem::path& prefix, const GraphCheckpoint& ckpt);
GraphCheckpoint load_graph(const std::filesystem::path& prefix);

/// "token<TAB>x1 ... <TAB>xd<TAB>norm" per row, norm being the hyperbolic
/// distance from the origin.
void export_tsv(std::ostream& out, const graph::ReparamTable& table, const corpus::Vocab& vocab);

nlohmann::json to_json(const graph::TrainConfig& c);
graph::TrainConfig graph_config_from_json(const nlohmann::json& j, graph::TrainConfig base = {});

} // namespace hyptext::checkpoint
