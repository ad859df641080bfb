#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "docsimp/metrics.hpp"
#include "docsimp/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace docsimp;

namespace {

// Random word-salad sentence over a tiny vocabulary; empty strings allowed.
std::string random_text(Rng& rng, int max_words) {
    static const char* kWords[] = {"the", "cat", "sat", "on", "a", "big", "mat",
                                   "dog", "ran", "fast", "and", "slept"};
    const int n = rng.below_int(max_words + 1);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (!out.empty()) out += ' ';
        out += kWords[rng.below_int(12)];
    }
    return out;
}

}  // namespace

TEST_CASE("sari and bleu match the frozen oracle on 1000 generated cases") {
    Rng rng(20240816);
    std::vector<std::string> outs;
    std::vector<std::vector<std::string>> refsets;
    for (int c = 0; c < 1000; ++c) {
        const std::string src = random_text(rng, 10);
        const std::string out = random_text(rng, 10);
        const int nref = 1 + rng.below_int(3);
        std::vector<std::string> refs;
        for (int r = 0; r < nref; ++r) refs.push_back(random_text(rng, 10));

        const SariScore got = sari(src, out, refs);
        const oracle::SariParts want = oracle::sari(src, out, refs);
        CHECK(std::abs(got.sari - want.sari) <= 1e-9);
        CHECK(std::abs(got.add - want.add) <= 1e-9);
        CHECK(std::abs(got.keep - want.keep) <= 1e-9);
        CHECK(std::abs(got.del - want.del) <= 1e-9);

        outs.push_back(out);
        refsets.push_back(refs);
        // Corpus BLEU compared in rolling batches of 50.
        if (outs.size() == 50) {
            CHECK(std::abs(corpus_bleu(outs, refsets) - oracle::bleu(outs, refsets)) <= 1e-9);
            outs.clear();
            refsets.clear();
        }
    }
}

TEST_CASE("sari boundary cases") {
    // Output identical to the sole reference: perfect by construction.
    const SariScore s1 = sari("the big cat sat on the mat", "the cat sat", {"the cat sat"});
    CHECK(s1.sari == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(s1.add == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(s1.keep == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(s1.del == doctest::Approx(100.0).epsilon(1e-12));

    // Identity triple: nothing added, everything kept, nothing deleted.
    const SariScore s2 = sari("a b c d", "a b c d", {"a b c d"});
    CHECK(s2.sari == doctest::Approx(100.0).epsilon(1e-12));

    CHECK_THROWS_AS(sari("a", "a", {}), ValidationError);
}

TEST_CASE("sari is symmetric in reference order and component-consistent") {
    const std::string src = "the cat sat on the mat";
    const std::string out = "a cat sat";
    const std::vector<std::string> r1 = {"the cat slept", "a cat sat on a mat"};
    const std::vector<std::string> r2 = {r1[1], r1[0]};
    const SariScore a = sari(src, out, r1);
    const SariScore b = sari(src, out, r2);
    CHECK(a.sari == doctest::Approx(b.sari).epsilon(1e-12));
    CHECK(a.add == doctest::Approx(b.add).epsilon(1e-12));
    CHECK(a.keep == doctest::Approx(b.keep).epsilon(1e-12));
    CHECK(a.del == doctest::Approx(b.del).epsilon(1e-12));

    // sari is the mean of its components; each component the mean of its
    // per-order row, every order in [0, 100].
    CHECK(a.sari == doctest::Approx((a.add + a.keep + a.del) / 3.0).epsilon(1e-12));
    double add_m = 0, keep_m = 0, del_m = 0;
    for (int k = 0; k < 4; ++k) {
        CHECK(a.add_n[k] >= 0.0);
        CHECK(a.add_n[k] <= 100.0);
        CHECK(a.keep_n[k] >= 0.0);
        CHECK(a.keep_n[k] <= 100.0);
        CHECK(a.del_n[k] >= 0.0);
        CHECK(a.del_n[k] <= 100.0);
        add_m += a.add_n[k] / 4.0;
        keep_m += a.keep_n[k] / 4.0;
        del_m += a.del_n[k] / 4.0;
    }
    CHECK(a.add == doctest::Approx(add_m).epsilon(1e-12));
    CHECK(a.keep == doctest::Approx(keep_m).epsilon(1e-12));
    CHECK(a.del == doctest::Approx(del_m).epsilon(1e-12));
}

TEST_CASE("bleu boundaries") {
    // Perfect match with enough tokens for every order.
    CHECK(corpus_bleu({"a b c d e"}, {{"a b c d e"}}) == doctest::Approx(100.0).epsilon(1e-12));
    // Too short for any 4-gram: the pool is empty, score 0 by convention.
    CHECK(corpus_bleu({"a b"}, {{"a b"}}) == 0.0);
    // No unigram overlap at all.
    CHECK(corpus_bleu({"a b c d"}, {{"e f g h"}}) == 0.0);
    // Clipping takes the max over references.
    const double two_ref = corpus_bleu({"a a b c"}, {{"a b c d"}, {"a a x y"}});
    CHECK(two_ref > 0.0);
    CHECK_THROWS_AS(corpus_bleu({"a"}, {}), ValidationError);
    CHECK_THROWS_AS(corpus_bleu({"a"}, {{}}), ValidationError);
}

TEST_CASE("syllable counting") {
    CHECK(count_syllables("cat") == 1);
    CHECK(count_syllables("mat") == 1);
    CHECK(count_syllables("see") == 1);
    CHECK(count_syllables("idea") == 2);
    CHECK(count_syllables("cake") == 1);        // terminal silent e
    CHECK(count_syllables("table") == 2);       // consonant + le keeps its e
    CHECK(count_syllables("apple") == 2);
    CHECK(count_syllables("unbelievable") == 5);
    CHECK(count_syllables("rhythm") == 1);
    CHECK(count_syllables("xyz") == 1);         // floor at one
    CHECK(count_syllables("smile") == 1);       // vowel + le: the e is silent
}

TEST_CASE("fkgl anchors are exact") {
    // 6 words, 1 sentence, 6 syllables.
    CHECK(fkgl("The cat sat on the mat.") == 0.39 * 6.0 + 11.8 * 1.0 - 15.59);
    // 1 word, 1 sentence, 5 syllables.
    CHECK(fkgl("Unbelievable.") == 0.39 * 1.0 + 11.8 * 5.0 - 15.59);
    CHECK(fkgl("The cat sat on the mat.") == doctest::Approx(-1.45).epsilon(1e-9));
    CHECK(fkgl("Unbelievable.") == doctest::Approx(43.80).epsilon(1e-9));
}

TEST_CASE("fkgl invariances") {
    const std::string text = "The cat sat on the mat. A dog ran fast.";
    // Doubling the text doubles words, sentences and syllables alike.
    CHECK(fkgl(text) == doctest::Approx(fkgl(text + " " + text)).epsilon(1e-12));
    // More syllables per word reads harder at equal shape.
    CHECK(fkgl("Cat sat.") < fkgl("Extraordinarily complicated."));
    // Longer sentences read harder at equal syllable rate.
    CHECK(fkgl("The cat sat. The dog ran.") < fkgl("The cat sat on the mat with the dog."));
    CHECK_THROWS_AS(fkgl(""), ValidationError);
}

TEST_CASE("metric_tokenize") {
    CHECK(metric_tokenize("Hello, world!") ==
          std::vector<std::string>{"hello", ",", "world", "!"});
    CHECK(metric_tokenize("ab2c d-e") == std::vector<std::string>{"ab2c", "d", "-", "e"});
    CHECK(metric_tokenize("") == std::vector<std::string>{});
    CHECK(metric_tokenize("  A  ") == std::vector<std::string>{"a"});
}

TEST_CASE("length_stats") {
    const auto st = length_stats({"A b.", "C."});
    CHECK(st.tokens == 3);
    CHECK(st.sentences == 2);
    const auto empty = length_stats({});
    CHECK(empty.tokens == 0);
    CHECK(empty.sentences == 0);
}

TEST_CASE("evaluate_units aggregates and eval_csv renders the fixed layout") {
    std::vector<EvalUnit> units;
    units.push_back({"the cat sat on the mat", "the cat sat", {"the cat sat"}});
    units.push_back({"a dog ran fast", "a dog ran fast", {"a dog ran fast"}});
    EvalRow row = evaluate_units("perfect", units);
    CHECK(row.sari.sari == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(row.bleu == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(row.tok == doctest::Approx((3 + 4) / 2.0).epsilon(1e-12));
    CHECK(row.sent == doctest::Approx(1.0).epsilon(1e-12));
    // Per-order aggregates average across units like the scalars do.
    double add_m = 0;
    for (int k = 0; k < 4; ++k) add_m += row.sari.add_n[k] / 4.0;
    CHECK(row.sari.add == doctest::Approx(add_m).epsilon(1e-12));

    row.ms_per_sentence = 1.2345;
    row.external["grammar"] = 0.5;

    EvalRow bare;
    bare.system = "empty";
    bare.sari.sari = 12.3456;
    bare.sari.add = 1.0;
    bare.sari.keep = 2.0;
    bare.sari.del = 3.0;
    bare.fkgl = std::nan("");
    bare.bleu = 0.0;
    // bare has no timing and no external scores: blank cells.

    const std::string csv = eval_csv({row, bare});
    const std::string want_header = "system,sari,add,keep,delete,fkgl,bleu,tok,sent,ms_per_sentence,grammar\n";
    REQUIRE(csv.substr(0, want_header.size()) == want_header);
    const size_t l1 = csv.find('\n') + 1;
    const size_t l2 = csv.find('\n', l1) + 1;
    const std::string row1 = csv.substr(l1, l2 - l1);
    const std::string row2 = csv.substr(l2);
    CHECK(row1 == "perfect,100.00,100.00,100.00,100.00,"
                  // fkgl of "the cat sat a dog ran fast": 7 words, 1 sentence,
                  // 7 syllables -> 0.39*7 + 11.8*1 - 15.59 = -1.06
                  "-1.06,100.00,3.50,1.00,1.234,0.5000\n");
    CHECK(row2 == "empty,12.35,1.00,2.00,3.00,nan,0.00,0.00,0.00,,\n");
}

TEST_CASE("evaluate_units rejects empty input and empty reference sets") {
    CHECK_THROWS_AS(evaluate_units("x", {}), ValidationError);
    std::vector<EvalUnit> bad;
    bad.push_back({"a", "a", {}});
    CHECK_THROWS_AS(evaluate_units("x", bad), ValidationError);
}
