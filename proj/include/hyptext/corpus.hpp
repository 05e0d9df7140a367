#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hyptext::corpus {

using TokenId = std::uint32_t;

// ---- Tokenization -----------------------------------------------------------

struct TokenizeOptions {
    bool lowercase = true;
    // Bytes outside a-z (after lowercasing) become whitespace.
    bool letters_only = true;
};

std::vector<std::string> tokenize(std::string_view text, const TokenizeOptions& opts = {});

// ---- Vocabulary -------------------------------------------------------------

inline constexpr std::string_view kUnkToken = "<unk>";

/// Dense token <-> id map with corpus frequencies.
class Vocab {
public:
    Vocab() = default;

    /// Appends a new type or bumps the count of an existing one; returns its id.
    TokenId add(std::string_view token, std::uint64_t count = 1);

    /// Appends the reserved UNK type (once). Its count is the number of
    /// tokens it absorbed and may be zero.
    TokenId add_unk(std::uint64_t absorbed);

    std::size_t size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }

    std::optional<TokenId> find(std::string_view token) const;
    /// find(), falling back to UNK; throws OutOfRange when there is no UNK.
    TokenId id_or_unk(std::string_view token) const;
    /// Throws OutOfRange for unknown tokens.
    TokenId id(std::string_view token) const;

    const std::string& token(TokenId id) const;
    std::uint64_t count(TokenId id) const;
    std::optional<TokenId> unk_id() const noexcept { return unk_; }

    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    /// FNV-1a 64-bit over the id-ordered token list, as 16 hex digits.
    std::string hash() const;

    void save(const std::filesystem::path& path) const;
    static Vocab load(const std::filesystem::path& path);

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> index_;
    std::optional<TokenId> unk_;
};

struct VocabOptions {
    std::size_t max_types = 20000;
    std::uint64_t min_count = 1;
    bool add_unk = false;
};

/// Most-frequent-first vocabulary; ties broken lexicographically. Throws
/// EmptyCorpus when no token survives.
Vocab build_vocab(const std::vector<std::string>& tokens, const VocabOptions& opts);

std::vector<TokenId> to_ids(const std::vector<std::string>& tokens, const Vocab& vocab);

// ---- Stopwords --------------------------------------------------------------

using StopwordSet = std::unordered_set<std::string>;

/// Standard English list shipped with the library.
const StopwordSet& default_stopwords();
/// One token per line; blank lines and lines starting with '#' are skipped.
StopwordSet load_stopwords(const std::filesystem::path& path);

// ---- Co-occurrence graph ----------------------------------------------------

struct CoocEdge {
    TokenId u = 0; // u < v
    TokenId v = 0;
    std::uint64_t count = 0;
    double weight = 0.0; // count^c
};

struct CoocGraph {
    Vocab vocab;
    std::vector<CoocEdge> edges; // sorted by (u, v)
    double downsample = 1.0;
    std::size_t window = 0;

    /// Sum over edges of ceil(weight): the number of draws in one epoch.
    std::uint64_t epoch_draws() const;
};

struct CoocOptions {
    std::size_t window = 5;
    double downsample = 0.25;
    // Types rarer than this are dropped from the stream before windowing.
    std::uint64_t min_count = 1;
    std::size_t max_types = 0; // 0 = unlimited
};

/// Removes stopwords (and rare types), then counts every unordered pair of
/// distinct types at most `window` positions apart. weight = count^c.
CoocGraph build_cooc(const std::vector<std::string>& tokens, const CoocOptions& opts, const StopwordSet& stopwords);

// ---- Edge lists -------------------------------------------------------------

struct EdgeList {
    Vocab nodes; // first-seen order; counts = occurrences in the file
    std::vector<std::pair<TokenId, TokenId>> edges; // (parent, child), multiset
};

/// One "parent<TAB>child" (or comma-separated) pair per line. Throws
/// ParseError with the 1-based line number, EmptyCorpus for no edges.
EdgeList parse_edge_list(std::istream& in);
EdgeList load_edge_list(const std::filesystem::path& path);

// ---- Sentences and triples -------------------------------------------------

using Sentence = std::vector<TokenId>;

struct Triple {
    Sentence prev;
    Sentence source;
    Sentence next;
    bool augmented = false;
};

struct TripleOptions {
    bool augment = false;
    std::uint64_t seed = 1234;
};

/// Consecutive sentence triples, plus (when augmenting) one triple of
/// contiguous token spans per full triple, with span lengths drawn from the
/// empirical sentence-length distribution and uniform start positions.
/// Throws InsufficientData for fewer than three sentences.
std::vector<Triple> extract_triples(const std::vector<Sentence>& sentences, const TripleOptions& opts);

/// Reads one sentence per line; empty lines are skipped.
std::vector<std::vector<std::string>> read_sentences(std::istream& in, const TokenizeOptions& opts);

// ---- Parse trees ------------------------------------------------------------

struct ParseNode {
    std::vector<std::string> span;
    std::vector<ParseNode> children;
    int height = 0; // leaves 0, parents 1 + max child height

    bool is_leaf() const noexcept { return children.empty(); }
    std::size_t node_count() const;
};

/// Parses one PTB-style bracketed tree. Labels are discarded; `-NONE-`
/// empty elements and brackets left without terminals are dropped. Throws
/// ParseError carrying the byte offset.
ParseNode parse_bracketed(std::string_view text);

/// Parses every top-level bracketed tree in a stream.
std::vector<ParseNode> read_trees(std::istream& in);
std::vector<ParseNode> load_trees(const std::filesystem::path& path);

/// Bracketed form that parse_bracketed maps back to the same tree.
std::string to_bracketed(const ParseNode& node);

} // namespace hyptext::corpus
