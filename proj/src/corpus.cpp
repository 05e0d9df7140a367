#include "hyptext/corpus.hpp"

#include "hyptext/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <random>
#include <sstream>

namespace hyptext::corpus {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizeOptions& opts) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    };
    for (char ch : text) {
        char c = ch;
        if (opts.lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        const bool keep = opts.letters_only ? (c >= 'a' && c <= 'z') || (!opts.lowercase && c >= 'A' && c <= 'Z')
                                            : !is_space(c);
        if (keep) {
            cur.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

// ---- Vocab -----------------------------------------------------------------

TokenId Vocab::add(std::string_view token, std::uint64_t count) {
    if (auto it = index_.find(token); it != index_.end()) {
        counts_[it->second] += count;
        return it->second;
    }
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.emplace_back(token);
    counts_.push_back(count);
    index_.emplace(tokens_.back(), id);
    return id;
}

TokenId Vocab::add_unk(std::uint64_t absorbed) {
    if (unk_) return *unk_;
    if (index_.contains(kUnkToken)) throw InvalidInput("corpus already contains the reserved UNK token");
    unk_ = add(kUnkToken, 0);
    counts_[*unk_] = absorbed;
    return *unk_;
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    return std::nullopt;
}

TokenId Vocab::id_or_unk(std::string_view token) const {
    if (auto id = find(token)) return *id;
    if (unk_) return *unk_;
    throw OutOfRange("unknown token '" + std::string(token) + "'");
}

TokenId Vocab::id(std::string_view token) const {
    if (auto id = find(token)) return *id;
    throw OutOfRange("unknown token '" + std::string(token) + "'");
}

const std::string& Vocab::token(TokenId id) const {
    if (id >= tokens_.size()) throw OutOfRange("token id " + std::to_string(id) + " out of range");
    return tokens_[id];
}

std::uint64_t Vocab::count(TokenId id) const {
    if (id >= counts_.size()) throw OutOfRange("token id " + std::to_string(id) + " out of range");
    return counts_[id];
}

std::string Vocab::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 1099511628211ULL;
    };
    for (const auto& t : tokens_) {
        for (char c : t) mix(static_cast<unsigned char>(c));
        mix('\n');
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << counts_[i] << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
    auto in = open_input(path);
    Vocab v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw ParseError("vocab line " + std::to_string(lineno) + ": missing count", lineno);
        const std::string tok = line.substr(0, tab);
        std::uint64_t count = 0;
        try {
            count = std::stoull(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw ParseError("vocab line " + std::to_string(lineno) + ": bad count", lineno);
        }
        if (v.find(tok)) throw ParseError("vocab line " + std::to_string(lineno) + ": duplicate token", lineno);
        if (tok == kUnkToken) {
            v.add_unk(count);
        } else {
            v.add(tok, count);
        }
    }
    return v;
}

Vocab build_vocab(const std::vector<std::string>& tokens, const VocabOptions& opts) {
    if (opts.max_types < 1) throw InvalidInput("max_types must be at least 1");
    if (tokens.empty()) throw EmptyCorpus("cannot build a vocabulary from an empty corpus");
    std::unordered_map<std::string_view, std::uint64_t> counts;
    for (const auto& t : tokens) ++counts[t];
    std::vector<std::pair<std::string_view, std::uint64_t>> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Vocab v;
    std::uint64_t absorbed = 0;
    for (const auto& [tok, c] : sorted) {
        if (v.size() < opts.max_types && c >= opts.min_count && tok != kUnkToken) {
            v.add(tok, c);
        } else {
            absorbed += c;
        }
    }
    if (v.empty()) throw EmptyCorpus("no token type survives the vocabulary filter");
    if (opts.add_unk) v.add_unk(absorbed);
    return v;
}

std::vector<TokenId> to_ids(const std::vector<std::string>& tokens, const Vocab& vocab) {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.id_or_unk(t));
    return ids;
}

// ---- Stopwords ---------------------------------------------------------------

const StopwordSet& default_stopwords() {
    static const StopwordSet words = {
        "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours", "yourself",
        "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
        "they", "them", "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "these",
        "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do",
        "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while",
        "of", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during", "before",
        "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under", "again",
        "further", "then", "once", "here", "there", "when", "where", "why", "how", "all", "any", "both", "each",
        "few", "more", "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
        "too", "very", "s", "t", "can", "will", "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve",
        "y", "ain", "aren", "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn",
        "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn",
    };
    return words;
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
    auto in = open_input(path);
    StopwordSet out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && is_space(line.back())) line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && is_space(line[start])) ++start;
        if (start == line.size() || line[start] == '#') continue;
        out.insert(line.substr(start));
    }
    return out;
}

// ---- Co-occurrence -------------------------------------------------------------

std::uint64_t CoocGraph::epoch_draws() const {
    std::uint64_t n = 0;
    for (const auto& e : edges) n += static_cast<std::uint64_t>(std::ceil(e.weight));
    return n;
}

CoocGraph build_cooc(const std::vector<std::string>& tokens, const CoocOptions& opts, const StopwordSet& stopwords) {
    if (opts.window < 1) throw InvalidInput("co-occurrence window must be at least 1");
    if (!(opts.downsample > 0.0 && opts.downsample <= 1.0)) throw InvalidInput("downsampling exponent must lie in (0, 1]");

    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (!stopwords.contains(t)) kept.push_back(t);
    }

    CoocGraph g;
    g.downsample = opts.downsample;
    g.window = opts.window;
    if (kept.empty()) return g;

    VocabOptions vo;
    vo.max_types = opts.max_types == 0 ? kept.size() : opts.max_types;
    vo.min_count = opts.min_count;
    try {
        g.vocab = build_vocab(kept, vo);
    } catch (const EmptyCorpus&) {
        return g;
    }

    std::vector<TokenId> stream;
    stream.reserve(kept.size());
    for (const auto& t : kept) {
        if (auto id = g.vocab.find(t)) stream.push_back(*id);
    }

    std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const std::size_t end = std::min(stream.size(), i + opts.window + 1);
        for (std::size_t j = i + 1; j < end; ++j) {
            const TokenId a = stream[i];
            const TokenId b = stream[j];
            if (a == b) continue;
            const auto lo = std::min(a, b);
            const auto hi = std::max(a, b);
            ++pair_counts[(static_cast<std::uint64_t>(lo) << 32) | hi];
        }
    }
    g.edges.reserve(pair_counts.size());
    for (const auto& [key, count] : pair_counts) {
        CoocEdge e;
        e.u = static_cast<TokenId>(key >> 32);
        e.v = static_cast<TokenId>(key & 0xffffffffULL);
        e.count = count;
        e.weight = std::pow(static_cast<double>(count), opts.downsample);
        g.edges.push_back(e);
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const CoocEdge& a, const CoocEdge& b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    return g;
}

// ---- Edge lists --------------------------------------------------------------

EdgeList parse_edge_list(std::istream& in) {
    EdgeList out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
        const auto pos = line.find(sep);
        if (pos == std::string::npos || line.find(sep, pos + 1) != std::string::npos) {
            throw ParseError("edge list line " + std::to_string(lineno) + ": expected two fields", lineno);
        }
        const std::string parent = line.substr(0, pos);
        const std::string child = line.substr(pos + 1);
        if (parent.empty() || child.empty()) {
            throw ParseError("edge list line " + std::to_string(lineno) + ": empty node name", lineno);
        }
        if (parent == child) {
            throw ParseError("edge list line " + std::to_string(lineno) + ": self-loop on '" + parent + "'", lineno);
        }
        const TokenId p = out.nodes.add(parent);
        const TokenId c = out.nodes.add(child);
        out.edges.emplace_back(p, c);
    }
    if (out.edges.empty()) throw EmptyCorpus("edge list contains no edges");
    return out;
}

EdgeList load_edge_list(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return parse_edge_list(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.position());
    } catch (const EmptyCorpus& e) {
        throw EmptyCorpus(path.string() + ": " + e.what());
    }
}

// ---- Triples -----------------------------------------------------------------

std::vector<Triple> extract_triples(const std::vector<Sentence>& sentences, const TripleOptions& opts) {
    if (sentences.size() < 3) throw InsufficientData("need at least three sentences to form a triple");
    std::vector<Triple> out;
    out.reserve(opts.augment ? 2 * (sentences.size() - 2) : sentences.size() - 2);
    for (std::size_t i = 1; i + 1 < sentences.size(); ++i) {
        out.push_back(Triple{sentences[i - 1], sentences[i], sentences[i + 1], false});
    }
    if (!opts.augment) return out;

    std::vector<TokenId> stream;
    std::vector<std::size_t> lengths;
    for (const auto& s : sentences) {
        stream.insert(stream.end(), s.begin(), s.end());
        if (!s.empty()) lengths.push_back(s.size());
    }
    if (lengths.empty() || stream.size() < 3) return out;

    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick_len(0, lengths.size() - 1);
    const std::size_t full = out.size();
    for (std::size_t k = 0; k < full; ++k) {
        std::size_t len[3];
        for (auto& l : len) l = lengths[pick_len(rng)];
        // Shrink proportionally if the three spans do not fit in the stream.
        while (len[0] + len[1] + len[2] > stream.size()) {
            for (auto& l : len) l = std::max<std::size_t>(1, l / 2);
        }
        const std::size_t total = len[0] + len[1] + len[2];
        std::uniform_int_distribution<std::size_t> pick_start(0, stream.size() - total);
        const std::size_t start = pick_start(rng);
        auto span = [&](std::size_t from, std::size_t n) {
            return Sentence(stream.begin() + static_cast<std::ptrdiff_t>(from),
                            stream.begin() + static_cast<std::ptrdiff_t>(from + n));
        };
        out.push_back(Triple{span(start, len[0]), span(start + len[0], len[1]), span(start + len[0] + len[1], len[2]), true});
    }
    return out;
}

std::vector<std::vector<std::string>> read_sentences(std::istream& in, const TokenizeOptions& opts) {
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        auto toks = tokenize(line, opts);
        if (!toks.empty()) out.push_back(std::move(toks));
    }
    return out;
}

// ---- Parse trees -------------------------------------------------------------

std::size_t ParseNode::node_count() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.node_count();
    return n;
}

namespace {

class TreeReader {
public:
    TreeReader(std::string_view text, std::size_t base) : text_(text), base_(base) {}

    void skip_space() {
        while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    }
    bool at_end() {
        skip_space();
        return pos_ >= text_.size();
    }
    std::size_t pos() const { return pos_; }

    // Parses "( [label] item* )"; returns nullopt if the bracket held no terminals.
    std::optional<ParseNode> bracket() {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != '(') fail("expected '('");
        const std::size_t open = pos_;
        ++pos_;
        skip_space();
        bool empty_element = false;
        bool first = true;
        ParseNode node;
        while (true) {
            skip_space();
            if (pos_ >= text_.size()) fail("unbalanced brackets: '(' at offset " + std::to_string(base_ + open) + " is never closed", open);
            const char c = text_[pos_];
            if (c == ')') {
                ++pos_;
                break;
            }
            if (c == '(') {
                if (auto child = bracket()) node.children.push_back(std::move(*child));
                first = false;
                continue;
            }
            std::string atom = read_atom();
            if (first) {
                // Leading atom is the constituent label.
                empty_element = atom == "-NONE-";
                first = false;
                continue;
            }
            ParseNode leaf;
            leaf.span.push_back(std::move(atom));
            node.children.push_back(std::move(leaf));
        }
        if (empty_element || node.children.empty()) return std::nullopt;
        int h = 0;
        for (const auto& ch : node.children) {
            h = std::max(h, ch.height + 1);
            node.span.insert(node.span.end(), ch.span.begin(), ch.span.end());
        }
        node.height = h;
        return node;
    }

    [[noreturn]] void fail(const std::string& msg, std::optional<std::size_t> at = std::nullopt) const {
        const std::size_t off = base_ + at.value_or(pos_);
        throw ParseError("parse tree: " + msg + " (byte offset " + std::to_string(off) + ")", off);
    }

private:
    std::string read_atom() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' && text_[pos_] != ')') ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string_view text_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

} // namespace

ParseNode parse_bracketed(std::string_view text) {
    TreeReader r(text, 0);
    if (r.at_end()) r.fail("empty input");
    auto node = r.bracket();
    if (!r.at_end()) r.fail("trailing characters after tree");
    if (!node) r.fail("tree has no terminals", 0);
    return std::move(*node);
}

std::vector<ParseNode> read_trees(std::istream& in) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<ParseNode> out;
    TreeReader r(text, 0);
    while (!r.at_end()) {
        if (auto node = r.bracket()) out.push_back(std::move(*node));
    }
    return out;
}

std::vector<ParseNode> load_trees(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_trees(in);
}

std::string to_bracketed(const ParseNode& node) {
    if (node.is_leaf()) return node.span.empty() ? std::string() : node.span.front();
    std::string out = "(X";
    for (const auto& c : node.children) {
        out.push_back(' ');
        out += to_bracketed(c);
    }
    out.push_back(')');
    return out;
}

} // namespace hyptext::corpus
