#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace docsimp {

// Sentence operations, in canonical order. The order doubles as the
// tie-break order wherever an argmax over operations can tie.
enum class Op { copy = 0, rephrase = 1, split = 2, del = 3 };

inline constexpr int kNumOps = 4;
inline constexpr int kNumReadingLevels = 5;

const char* op_name(Op op);
Op op_from_name(const std::string& s);

// Fixed special-token ids. Word ids start at kNumSpecials.
enum SpecialTok : int {
    kPad = 0,
    kBos = 1,
    kEos = 2,
    kUnk = 3,
    kSep = 4,
    kRl0 = 5,  // reading levels 0..4 occupy 5..9
    kOpCopy = 10,
    kOpRephrase = 11,
    kOpSplit = 12,
    kOpDelete = 13,
    kNumSpecials = 14,
};

// Whitespace vocabulary over a closed word list. Special tokens live in a
// reserved id range and are never produced from raw text: a literal "<bos>"
// in input text maps to UNK like any other out-of-vocabulary token.
class Tokenizer {
public:
    Tokenizer() = default;

    // Words are deduplicated and sorted, so any permutation of the same word
    // set builds the same tokenizer.
    static Tokenizer from_words(std::vector<std::string> words);
    static Tokenizer load_vocab(const std::string& path);
    void save_vocab(const std::string& path) const;

    int vocab_size() const { return kNumSpecials + static_cast<int>(words_.size()); }
    uint64_t vocab_hash() const;

    static int rl_id(int level);      // level in 0..4
    static int op_id(Op op);
    static bool is_special(int id) { return id < kNumSpecials; }
    static bool is_op_id(int id) { return id >= kOpCopy && id <= kOpDelete; }
    static Op op_from_id(int id);

    // Splits on whitespace and rejoins with single spaces.
    static std::vector<std::string> split_ws(const std::string& text);
    static std::string normalize_ws(const std::string& text);

    // Body encoding only: words and UNKs, no specials.
    std::vector<int> encode_body(const std::string& text) const;

    // Full model input: [OP] [RL] BOS body EOS. Throws ValidationError when
    // the result would exceed max_len.
    std::vector<int> tokenize(const std::string& text, std::optional<int> level,
                              std::optional<Op> op, int max_len) const;

    // Multi-sentence unit input: [OP...] [RL] BOS body EOS, one op token per
    // source sentence of the unit, as a single prefix block.
    std::vector<int> tokenize_unit(const std::string& text, std::optional<int> level,
                                   const std::vector<Op>& ops, int max_len) const;

    // Inverse for display: drops structural specials, renders UNK as <unk>,
    // renders OP tokens by their surface name (multitask target inspection).
    std::string detokenize(const std::vector<int>& ids) const;

    const std::string& word(int id) const;  // id >= kNumSpecials
    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;  // word -> id
};

}  // namespace docsimp
