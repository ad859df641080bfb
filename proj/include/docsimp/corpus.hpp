#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "docsimp/tokenizer.hpp"

namespace docsimp {

// One side of an aligned pair. para_index runs parallel to sentences and is
// non-decreasing starting at 0.
struct Document {
    std::string doc_id;
    int reading_level = 0;
    std::vector<std::string> sentences;
    std::vector<int> para_index;

    int paragraph_of(int i) const { return para_index[static_cast<size_t>(i)]; }
    // First sentence index of the paragraph containing i.
    int paragraph_start(int i) const {
        int j = i;
        while (j > 0 && para_index[j - 1] == para_index[i]) --j;
        return j;
    }
};

// Complex/simple document pair with a sentence alignment: alignment[i] lists
// the simple-side indices produced from complex sentence i (empty for
// deletions, two or more for splits). ops[i] is the gold operation label.
struct AlignedPair {
    Document complex_doc;
    Document simple_doc;
    std::vector<std::vector<int>> alignment;
    std::vector<Op> ops;
};

struct AlignedCorpus {
    std::string split_tag;  // "train", "valid" or "test"
    std::vector<AlignedPair> pairs;
};

struct Plan {
    std::string doc_id;
    std::vector<Op> ops;
};

// Synthetic generator settings. Ops are drawn from op_distribution; for
// target levels above 2 the split and delete weights are scaled by
// 1 + level_skew * (level - 2) before renormalizing. With cue_rule on, each
// sentence carries a cue word and the operation applied to sentence i is
// dictated by the cue of sentence i+1 (the last sentence is copied); cue
// classes are drawn from op_distribution.
struct GenSpec {
    int num_docs = 100;
    int min_sentences = 3;
    int max_sentences = 8;
    std::map<Op, double> op_distribution = {
        {Op::copy, 0.4}, {Op::rephrase, 0.3}, {Op::split, 0.2}, {Op::del, 0.1}};
    std::vector<int> target_levels = {2, 3, 4};
    double level_skew = 0.4;
    double adj_prob = 0.35;
    double adv_prob = 0.2;
    bool cue_rule = false;
    uint64_t seed = 13;
    int article_start = 0;  // first article ordinal; keep ranges disjoint across splits
    std::string split_tag = "train";
};

// Deterministic: same spec gives byte-identical serialized output. Articles
// are seeded individually from (seed, article ordinal), so disjoint ordinal
// ranges never share content.
AlignedCorpus generate_synthetic(const GenSpec& spec);

// Gold labels recovered from the alignment: 0 targets = delete, >= 2 =
// split, 1 = copy when the text matches (modulo whitespace) else rephrase.
std::vector<Op> derive_op_labels(const AlignedPair& pair);

struct Violation {
    std::string doc_id;
    std::string rule;
    std::string message;
};
using ValidationReport = std::vector<Violation>;

ValidationReport validate_corpus(const AlignedCorpus& corpus);
// Adds the cross-split check: an article key appearing under two different
// split tags is a violation.
ValidationReport validate_corpora(const std::vector<const AlignedCorpus*>& corpora);

// JSONL, one record per pair, canonical serialization (sorted keys, compact).
AlignedCorpus load_corpus(const std::string& path, const std::string& split_tag);
void save_corpus(const AlignedCorpus& corpus, const std::string& path);

// Plan files: "doc_id<TAB>op op op ...".
std::vector<Plan> load_plans(const std::string& path);
void save_plans(const std::vector<Plan>& plans, const std::string& path);

// "artNNNN" prefix of "artNNNN:s-t" ids; doc_id itself when no ':' present.
std::string article_key(const std::string& doc_id);

// Sorted unique words occurring in the pair texts.
std::vector<std::string> collect_vocab(const AlignedCorpus& corpus);
// The full closed generator vocabulary (stable across specs).
std::vector<std::string> generator_vocabulary();

// Joins sentences with single spaces.
std::string join_sentences(const std::vector<std::string>& sentences, int begin = 0,
                           int end = -1);

}  // namespace docsimp
