#include <catch2/catch_amalgamated.hpp>

#include <map>

#include <inkline/evalkit.hpp>

using namespace inkline;

namespace {

// Independent oracle: full-matrix recursion with memoization.
size_t lev_oracle(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    std::map<std::pair<size_t, size_t>, size_t> memo;
    std::function<size_t(size_t, size_t)> go = [&](size_t i, size_t j) -> size_t {
        if (i == a.size()) return b.size() - j;
        if (j == b.size()) return a.size() - i;
        auto key = std::make_pair(i, j);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
        best = std::min(best, go(i + 1, j) + 1);
        best = std::min(best, go(i, j + 1) + 1);
        memo[key] = best;
        return best;
    };
    return go(0, 0);
}

std::vector<uint32_t> random_seq(Rng& rng, size_t max_len, uint32_t alphabet) {
    std::vector<uint32_t> s(rng.uniform_int(max_len + 1));
    for (auto& c : s) c = 'a' + static_cast<uint32_t>(rng.uniform_int(alphabet));
    return s;
}

std::string to_utf8(const std::vector<uint32_t>& cps) {
    std::string s;
    for (uint32_t c : cps) s += utf8_encode(c);
    return s;
}

}  // namespace

TEST_CASE("utf8 round trip covers 1..4 byte sequences") {
    std::vector<uint32_t> cps = {0x41, 0xe9, 0x20ac, 0x1f600, 0x7a};
    std::string s = to_utf8(cps);
    REQUIRE(utf8_decode(s) == cps);
    REQUIRE(utf8_decode("a\xc3").back() == 0xfffd);  // truncated tail
}

TEST_CASE("levenshtein matches textbook cases") {
    REQUIRE(levenshtein(std::string("kitten"), std::string("sitting")) == 3);
    REQUIRE(levenshtein(std::string(""), std::string("abc")) == 3);
    REQUIRE(levenshtein(std::string("abc"), std::string("abc")) == 0);
    REQUIRE(levenshtein(std::string("flaw"), std::string("lawn")) == 2);
}

TEST_CASE("levenshtein equals an independent DP oracle on random pairs") {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        auto a = random_seq(rng, 12, 4);
        auto b = random_seq(rng, 12, 4);
        REQUIRE(levenshtein(a, b) == lev_oracle(a, b));
    }
}

TEST_CASE("levenshtein satisfies the metric axioms on random triples") {
    Rng rng(202);
    for (int trial = 0; trial < 1000; ++trial) {
        auto a = random_seq(rng, 8, 3);
        auto b = random_seq(rng, 8, 3);
        auto c = random_seq(rng, 8, 3);
        size_t ab = levenshtein(a, b), ba = levenshtein(b, a);
        size_t bc = levenshtein(b, c), ac = levenshtein(a, c);
        REQUIRE(ab == ba);                      // symmetry
        REQUIRE((ab == 0) == (a == b));         // identity of indiscernibles
        REQUIRE(ac <= ab + bc);                 // triangle inequality
    }
}

TEST_CASE("cer divides by reference length") {
    REQUIRE(cer("hello", "hello") == Catch::Approx(0.0));
    REQUIRE(cer("hxllo", "hello") == Catch::Approx(0.2));
    REQUIRE(cer("", "ab") == Catch::Approx(1.0));
    REQUIRE(cer("abcd", "ab") == Catch::Approx(1.0));  // can exceed via insertions: 2 edits / 2
    REQUIRE_THROWS_AS(cer("x", ""), std::invalid_argument);
}

TEST_CASE("corpus cer micro-averages edits over total reference length") {
    std::vector<std::string> preds = {"ab", "xyz"};
    std::vector<std::string> reals = {"ab", "xy"};
    // 0 edits + 1 edit over 4 reference chars
    REQUIRE(corpus_cer(preds, reals) == Catch::Approx(0.25));
}

TEST_CASE("wer counts exact word mismatches") {
    REQUIRE(wer({"a", "b", "c", "d"}, {"a", "x", "c", "y"}) == Catch::Approx(0.5));
    REQUIRE(wer({}, {}) == 0.0);
    REQUIRE_THROWS_AS(wer({"a"}, {}), std::invalid_argument);
}

TEST_CASE("classification metrics from a known confusion matrix") {
    ConfusionMatrix cm({"cat", "dog", "bird"});
    cm.add("cat", "cat", 8);
    cm.add("cat", "dog", 2);
    cm.add("dog", "dog", 5);
    cm.add("dog", "bird", 5);
    cm.add("bird", "bird", 10);
    auto rep = classification_metrics(cm);
    REQUIRE(rep.accuracy == Catch::Approx(23.0 / 30.0));
    REQUIRE(*rep.per_category[0].recall == Catch::Approx(0.8));
    REQUIRE(*rep.per_category[0].precision == Catch::Approx(1.0));
    REQUIRE(*rep.per_category[1].precision == Catch::Approx(5.0 / 7.0));
    REQUIRE(*rep.per_category[2].f1 == Catch::Approx(2 * 1.0 * (10.0 / 15.0) / (1.0 + 10.0 / 15.0)));
    // a category never predicted and never true has no defined metrics
    ConfusionMatrix cm2({"a", "b"});
    cm2.add("a", "a", 3);
    auto rep2 = classification_metrics(cm2);
    REQUIRE_FALSE(rep2.per_category[1].recall.has_value());
    REQUIRE_FALSE(rep2.per_category[1].precision.has_value());
}

namespace {

// O(P*N) pair-counting oracle: AUC = P(score_pos > score_neg) + 0.5 P(tie)
double auc_oracle(const std::vector<double>& scores, const std::vector<bool>& labels) {
    double wins = 0;
    size_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

}  // namespace

TEST_CASE("roc auc equals the pair-counting oracle, ties included") {
    Rng rng(303);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 10 + rng.uniform_int(40);
        std::vector<double> scores(n);
        std::vector<bool> labels(n);
        bool saw_pos = false, saw_neg = false;
        for (size_t i = 0; i < n; ++i) {
            scores[i] = std::round(rng.uniform() * 8) / 8;  // force ties
            labels[i] = rng.bernoulli(0.5);
            (labels[i] ? saw_pos : saw_neg) = true;
        }
        if (!saw_pos || !saw_neg) continue;
        auto r = roc_auc(scores, labels);
        REQUIRE(r.auc == Catch::Approx(auc_oracle(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("roc of a perfect and a constant scorer") {
    std::vector<double> s = {0.9, 0.8, 0.2, 0.1};
    std::vector<bool> l = {true, true, false, false};
    REQUIRE(roc_auc(s, l).auc == Catch::Approx(1.0));
    std::vector<double> flat = {0.5, 0.5, 0.5, 0.5};
    REQUIRE(roc_auc(flat, l).auc == Catch::Approx(0.5));
    REQUIRE_THROWS_AS(roc_auc(s, std::vector<bool>{true, true, true, true}), std::invalid_argument);
}

TEST_CASE("bootstrap interval brackets the mean and narrows with data") {
    Rng rng(404);
    std::vector<double> small(20), big(500);
    for (auto& v : small) v = rng.normal(5.0, 1.0);
    for (auto& v : big) v = rng.normal(5.0, 1.0);
    Rng r1(1), r2(1);
    auto ci_small = bootstrap_ci(small, 1000, 0.95, r1);
    auto ci_big = bootstrap_ci(big, 1000, 0.95, r2);
    REQUIRE(ci_small.lower <= ci_small.point);
    REQUIRE(ci_small.point <= ci_small.upper);
    REQUIRE(ci_big.upper - ci_big.lower < ci_small.upper - ci_small.lower);
    REQUIRE(ci_big.lower < 5.0);
    REQUIRE(ci_big.upper > 5.0);
}

TEST_CASE("bootstrap over pairs reuses the corpus metric") {
    std::vector<std::string> preds = {"aa", "bb", "cc", "dd", "ee"};
    std::vector<std::string> reals = {"aa", "bb", "cc", "dd", "xx"};
    Rng rng(6);
    auto ci = bootstrap_ci_pairs(preds, reals, [](const auto& p, const auto& r) { return wer(p, r); }, 500, 0.9, rng);
    REQUIRE(ci.point == Catch::Approx(0.2));
    REQUIRE(ci.lower >= 0.0);
    REQUIRE(ci.upper <= 1.0);
    REQUIRE(ci.lower <= ci.upper);
}

TEST_CASE("bootstrap is deterministic under a fixed rng seed") {
    std::vector<double> vals = {1, 2, 3, 4, 5, 6, 7, 8};
    Rng a(99), b(99);
    auto ca = bootstrap_ci(vals, 200, 0.95, a);
    auto cb = bootstrap_ci(vals, 200, 0.95, b);
    REQUIRE(ca.lower == cb.lower);
    REQUIRE(ca.upper == cb.upper);
}
