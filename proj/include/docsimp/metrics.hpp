#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace docsimp {

// Lowercased whitespace tokens with punctuation split off: maximal
// alphanumeric runs are words, every other non-space character is its own
// token. Used by SARI and BLEU (FKGL counts raw whitespace words instead).
std::vector<std::string> metric_tokenize(const std::string& text);

struct SariScore {
    double sari = 0.0;
    double add = 0.0;
    double keep = 0.0;
    double del = 0.0;
    // Per-order contributions (index n-1); each component above is the mean
    // of its row.
    std::array<double, 4> add_n{};
    std::array<double, 4> keep_n{};
    std::array<double, 4> del_n{};
};

// n = 1..4 n-gram SARI. add is an F1 over newly introduced n-grams, keep an
// F1 over retained n-grams weighted by the fraction of references retaining
// them, delete a precision over removed n-grams. Components macro-average
// over n; at a given n a component whose output-side and reference-side
// candidate sets are both empty scores 1, and bare 0/0 ratios score 0.
// Scores are 0..100 and sari is the mean of the three components.
SariScore sari(const std::string& source, const std::string& output,
               const std::vector<std::string>& refs);

// Corpus BLEU, 4-gram geometric mean, no smoothing: any empty n-gram match
// pool yields 0. Brevity penalty against closest reference length (ties to
// the shorter one). Returns 0..100.
double corpus_bleu(const std::vector<std::string>& outputs,
                   const std::vector<std::vector<std::string>>& refs);

// Syllables: maximal aeiouy groups after stripping non-letters, minus one
// for a terminal silent 'e' (not counting consonant + "le" endings, whose
// 'e' marks a spoken syllable), never below 1.
int count_syllables(const std::string& word);

// 0.39 * words/sentences + 11.8 * syllables/words - 15.59. Words are raw
// whitespace tokens; sentences come from resegment. Text must contain at
// least one sentence.
double fkgl(const std::string& text);

struct LengthStats {
    long tokens = 0;
    long sentences = 0;
};
LengthStats length_stats(const std::vector<std::string>& sentences);

// One aligned evaluation unit (a document, or a provenance-scoped sentence
// group in sentence mode).
struct EvalUnit {
    std::string source;
    std::string output;
    std::vector<std::string> refs;
};

struct EvalRow {
    std::string system;
    SariScore sari;
    double fkgl = 0.0;
    double bleu = 0.0;
    double tok = 0.0;   // mean output tokens per unit
    double sent = 0.0;  // mean output sentences per unit
    double ms_per_sentence = -1.0;  // < 0 = not timed
    std::map<std::string, double> external;  // plug-in scorer results
};

// SARI is macro-averaged over units; BLEU is corpus-level; FKGL is computed
// over the concatenated non-empty outputs (NaN if every output is empty).
EvalRow evaluate_units(const std::string& system, const std::vector<EvalUnit>& units);

// Header "system,sari,add,keep,delete,fkgl,bleu,tok,sent,ms_per_sentence"
// plus one sorted column per external score name used by any row.
std::string eval_csv(const std::vector<EvalRow>& rows);

}  // namespace docsimp
