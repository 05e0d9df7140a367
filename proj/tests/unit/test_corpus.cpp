#include "doctest.h"

#include "hyptext/corpus.hpp"
#include "hyptext/errors.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace hyptext;
using namespace hyptext::corpus;

namespace {

std::string join(const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += x + " ";
    return s;
}

} // namespace

TEST_SUITE("corpus") {

TEST_CASE("tokenize") {
    CHECK(tokenize("Hello, World") == std::vector<std::string>{"hello", "world"});
    CHECK(tokenize("a1b") == std::vector<std::string>{"a", "b"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("Hello, World", {false, false}) == std::vector<std::string>{"Hello,", "World"});
}

TEST_CASE("tokenize is idempotent") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> ch(32, 126);
    for (int i = 0; i < 200; ++i) {
        std::string s;
        for (int k = 0; k < 60; ++k) s.push_back(static_cast<char>(ch(rng)));
        for (const TokenizeOptions opts : {TokenizeOptions{true, true}, TokenizeOptions{false, false}, TokenizeOptions{true, false}}) {
            const auto once = tokenize(s, opts);
            CHECK(tokenize(join(once), opts) == once);
        }
    }
}

TEST_CASE("vocabulary ordering and truncation") {
    const std::vector<std::string> toks{"a", "b", "a"};
    auto v = build_vocab(toks, {10, 1, false});
    REQUIRE(v.size() == 2);
    CHECK(v.token(0) == "a");
    CHECK(v.count(0) == 2);
    CHECK(v.count(1) == 1);

    auto t = build_vocab(toks, {1, 1, true});
    CHECK(t.size() == 2);
    CHECK(t.token(0) == "a");
    CHECK(t.id_or_unk("b") == *t.unk_id());
    CHECK(t.count(*t.unk_id()) == 1);

    const std::vector<std::string> tie{"y", "x", "y", "x", "x", "y"};
    auto tv = build_vocab(tie, {1, 1, false});
    CHECK(tv.size() == 1);
    CHECK(tv.token(0) == "x");

    CHECK_THROWS_AS(build_vocab({}, {}), EmptyCorpus);
    CHECK_THROWS_AS(t.id("zzz"), OutOfRange);
}

TEST_CASE("vocabulary round trips through TSV and hashes by token list") {
    auto v = build_vocab({"cat", "dog", "cat", "emu"}, {10, 1, true});
    const auto path = std::filesystem::temp_directory_path() / "hyptext_vocab_test.tsv";
    v.save(path);
    const auto w = Vocab::load(path);
    CHECK(w.tokens() == v.tokens());
    CHECK(w.counts() == v.counts());
    CHECK(w.hash() == v.hash());
    CHECK(w.unk_id() == v.unk_id());
    CHECK(v.hash().size() == 16);
    auto other = build_vocab({"cat", "dog", "cat"}, {10, 1, true});
    CHECK(other.hash() != v.hash());
    std::filesystem::remove(path);
}

TEST_CASE("co-occurrence counts on a hand example") {
    const auto g = build_cooc({"a", "b", "a"}, {1, 1.0, 1, 0}, {});
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].count == 2);
    CHECK(g.edges[0].weight == 2.0);
    CHECK(build_cooc({"a"}, {}, {}).edges.empty());

    const std::vector<std::string> sixteen(17, "x");
    std::vector<std::string> alt;
    for (int i = 0; i < 17; ++i) alt.push_back(i % 2 ? "p" : "q");
    const auto h = build_cooc(alt, {1, 0.25, 1, 0}, {});
    REQUIRE(h.edges.size() == 1);
    CHECK(h.edges[0].count == 16);
    CHECK(h.edges[0].weight == doctest::Approx(2.0));
    CHECK(h.epoch_draws() == 2);
}

TEST_CASE("co-occurrence with c = 1 reproduces brute-force pair counts") {
    std::mt19937_64 rng(12);
    const std::vector<std::string> words{"the", "cat", "sat", "on", "mat", "dog", "ran", "a"};
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    const StopwordSet stop{"the", "a", "on"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> toks;
        for (int i = 0; i < 100; ++i) toks.push_back(words[pick(rng)]);
        const std::size_t window = 1 + static_cast<std::size_t>(trial % 5);
        const auto g = build_cooc(toks, {window, 1.0, 1, 0}, stop);

        std::vector<std::string> kept;
        for (const auto& t : toks) {
            if (!stop.count(t)) kept.push_back(t);
        }
        std::map<std::pair<std::string, std::string>, std::uint64_t> want;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            for (std::size_t j = i + 1; j < kept.size() && j - i <= window; ++j) {
                if (kept[i] == kept[j]) continue;
                auto key = std::minmax(kept[i], kept[j]);
                ++want[{key.first, key.second}];
            }
        }
        std::map<std::pair<std::string, std::string>, std::uint64_t> got;
        for (const auto& e : g.edges) {
            CHECK(e.u < e.v);
            CHECK(e.weight == static_cast<double>(e.count));
            auto key = std::minmax(g.vocab.token(e.u), g.vocab.token(e.v));
            got[{key.first, key.second}] = e.count;
        }
        CHECK(got == want);
    }
}

TEST_CASE("stopwords ship with the library and load from files") {
    CHECK(default_stopwords().count("the") == 1);
    CHECK(default_stopwords().count("mammal") == 0);
    const auto path = std::filesystem::temp_directory_path() / "hyptext_stop.txt";
    {
        std::ofstream out(path);
        out << "# comment\nfoo\n\nbar\n";
    }
    const auto s = load_stopwords(path);
    CHECK(s == StopwordSet{"foo", "bar"});
    std::filesystem::remove(path);
}

TEST_CASE("edge lists") {
    std::istringstream in("mammal\tdog\nmammal\tcat\n");
    const auto e = parse_edge_list(in);
    CHECK(e.nodes.size() == 3);
    CHECK(e.edges.size() == 2);
    CHECK(e.nodes.token(0) == "mammal");

    std::istringstream dup("a,b\na,b\n");
    CHECK(parse_edge_list(dup).edges.size() == 2);

    std::istringstream empty("");
    CHECK_THROWS_AS(parse_edge_list(empty), EmptyCorpus);

    std::istringstream bad("a\tb\nlonely\n");
    try {
        parse_edge_list(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(err.position() == 2);
    }
    std::istringstream loop("a\ta\n");
    CHECK_THROWS_AS(parse_edge_list(loop), ParseError);
    CHECK_THROWS_AS(load_edge_list("/nonexistent/edges.tsv"), IoError);
}

TEST_CASE("triples") {
    std::vector<Sentence> s{{1}, {2, 3}, {4}, {5, 6, 7}, {8}};
    CHECK(extract_triples({s.begin(), s.begin() + 3}, {}).size() == 1);
    const auto t = extract_triples(s, {});
    REQUIRE(t.size() == 3);
    CHECK(t[0].prev == Sentence{1});
    CHECK(t[0].source == Sentence{2, 3});
    CHECK(t[0].next == Sentence{4});
    CHECK_THROWS_AS(extract_triples({{1}, {2}}, {}), InsufficientData);

    for (std::size_t n = 3; n < 12; ++n) {
        std::vector<Sentence> many(n, Sentence{1, 2});
        CHECK(extract_triples(many, {}).size() == n - 2);
    }
}

TEST_CASE("augmented triples are seeded spans of the token stream") {
    std::vector<Sentence> s;
    TokenId next = 0;
    for (std::size_t len : {3, 5, 2, 4, 6, 3}) {
        Sentence x;
        for (std::size_t i = 0; i < len; ++i) x.push_back(next++);
        s.push_back(x);
    }
    const auto a = extract_triples(s, {true, 42});
    const auto b = extract_triples(s, {true, 42});
    REQUIRE(a.size() == 8);
    std::size_t augmented = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].source == b[i].source);
        CHECK(a[i].prev == b[i].prev);
        if (!a[i].augmented) continue;
        ++augmented;
        // contiguous and consecutive: prev, source, next follow each other in the stream
        const std::vector<const Sentence*> parts{&a[i].prev, &a[i].source, &a[i].next};
        TokenId expect = a[i].prev.front();
        for (const auto* p : parts) {
            CHECK(!p->empty());
            for (TokenId tok : *p) CHECK(tok == expect++);
        }
        for (const auto* p : parts) {
            const std::size_t len = p->size();
            CHECK((len == 2 || len == 3 || len == 4 || len == 5 || len == 6));
        }
    }
    CHECK(augmented == 4);
}

TEST_CASE("sentences are read one per line") {
    std::istringstream in("The cat.\n\nA dog ran!\n");
    const auto s = read_sentences(in, {});
    REQUIRE(s.size() == 2);
    CHECK(s[1] == std::vector<std::string>{"a", "dog", "ran"});
}

TEST_CASE("bracketed trees") {
    const auto one = parse_bracketed("(X word)");
    CHECK(one.height == 1);
    REQUIRE(one.children.size() == 1);
    CHECK(one.children[0].is_leaf());
    CHECK(one.children[0].height == 0);

    const auto t = parse_bracketed("(S (NP a) (VP b c))");
    CHECK(t.height == 2);
    CHECK(t.span == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.children.size() == 2);
    CHECK(t.children[1].span == std::vector<std::string>{"b", "c"});
    CHECK(t.children[1].height == 1);

    CHECK_THROWS_AS(parse_bracketed("((a)"), ParseError);
    try {
        parse_bracketed("(S (NP a)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position() <= 9);
    }

    const auto none = parse_bracketed("(S (NP (-NONE- *T*)) (VP ran))");
    CHECK(none.span == std::vector<std::string>{"ran"});
}

TEST_CASE("bracketed trees round trip") {
    const std::vector<std::string> inputs{
        "(S (NP (DT the) (NN cat)) (VP (VBD sat) (PP (IN on) (NP (DT the) (NN mat)))) (. .))",
        "(ROOT (S (NP I) (VP (V saw) (NP (D a) (N dog)))))",
        "(X w)",
    };
    for (const auto& s : inputs) {
        const auto t = parse_bracketed(s);
        const auto back = parse_bracketed(to_bracketed(t));
        CHECK(to_bracketed(back) == to_bracketed(t));
        CHECK(back.node_count() == t.node_count());
        CHECK(back.height == t.height);
        CHECK(back.span == t.span);
    }
    std::istringstream many("(S (A x))\n\n(S (B y) (C z))\n");
    CHECK(read_trees(many).size() == 2);
}

}
