#pragma once

#include <optional>
#include <string>
#include <vector>

#include "docsimp/corpus.hpp"
#include "docsimp/nn.hpp"
#include "docsimp/tokenizer.hpp"

namespace docsimp {

struct ContextEncoderConfig {
    int d_ctx = 64;
    int radius = 13;
    bool flag_embedding = true;
    int vocab_size = 0;
    uint64_t vocab_hash = 0;
    uint64_t seed = 13;
};

enum class SlotStatus : int { complex_src = 0, simplified = 1 };

// A window of sentence vectors around position i: already-simplified left
// neighbors (where available), the current and right-hand complex
// sentences. offsets[k] is the document offset of row k relative to i;
// offsets are consecutive and always contain 0.
struct ContextWindow {
    Mat<float> vectors;  // L x d_ctx, positional and flag embeddings added in
    std::vector<int> offsets;
    std::vector<SlotStatus> flags;

    int center() const {
        for (size_t k = 0; k < offsets.size(); ++k)
            if (offsets[k] == 0) return static_cast<int>(k);
        throw std::logic_error("context: window has no offset-0 slot");
    }
};

// Per-document array of simplified-sentence vectors, filled as generation
// proceeds. Entries are write-once: position i is set right after sentence i
// is generated and never overwritten.
class DynamicStore {
public:
    explicit DynamicStore(int n) : slots_(static_cast<size_t>(n)) {}

    int size() const { return static_cast<int>(slots_.size()); }
    bool has(int i) const { return slots_[static_cast<size_t>(i)].has_value(); }

    const std::vector<float>& get(int i) const {
        const auto& s = slots_[static_cast<size_t>(i)];
        if (!s) throw std::logic_error("context: reading unset store entry");
        return *s;
    }

    void set(int i, std::vector<float> v);

private:
    std::vector<std::optional<std::vector<float>>> slots_;
};

// Sentence vectors are mean-pooled token embeddings over the seq2seq word
// vocabulary; a learned sentinel vector stands in for deleted (empty)
// outputs. Window vectors get a positional embedding indexed by offset and,
// when enabled, a source/simplified flag embedding added on top.
class ContextEncoder {
public:
    ContextEncoder(const ContextEncoderConfig& cfg, const Tokenizer& tok);

    const ContextEncoderConfig& config() const { return cfg_; }
    ParamRegistry<float>& params() { return reg_; }
    const Tokenizer& tokenizer() const { return *tok_; }

    // Mean of token embedding rows. Empty (whitespace-only) text is an
    // error; deletions go through encode_output instead.
    std::vector<float> encode_sentence(const std::string& text) const;

    // encode_sentence, or the delete sentinel when text is blank.
    std::vector<float> encode_output(const std::string& text) const;

    std::vector<float> sentinel_vector() const;

    // Window centered on sentence i over doc; left-of-i slots read the store
    // (simplified) when an entry exists, otherwise fall back to the complex
    // sentence. store may be null (fully static windows).
    ContextWindow build_window(const Document& doc, int i, const DynamicStore* store) const;

    // Paragraph-granularity variant: slots at document index >= j, the first
    // sentence of the paragraph containing i, always use complex sentences;
    // the store is consulted only below j.
    ContextWindow build_window_paragraph(const Document& doc, int i,
                                         const DynamicStore* store) const;

    // Tape-side twin of the window math for end-to-end planner training.
    // A slot carries either body token ids or the sentinel.
    struct SlotSpec {
        std::vector<int> token_ids;  // ignored when sentinel
        bool sentinel = false;
        int offset = 0;
        SlotStatus flag = SlotStatus::complex_src;
    };
    Tape<float>::Id window_on_tape(Tape<float>& t, const std::vector<SlotSpec>& slots);
    Tape<float>::Id sentence_on_tape(Tape<float>& t, const std::vector<int>& token_ids);

private:
    std::vector<float> slot_vector(const std::vector<float>& base, int offset,
                                   SlotStatus flag) const;

    ContextEncoderConfig cfg_;
    const Tokenizer* tok_;
    ParamRegistry<float> reg_;
    Param<float>* tok_emb_;
    Param<float>* pos_emb_;   // (2 * radius + 1) x d_ctx
    Param<float>* flag_emb_;  // 2 x d_ctx
    Param<float>* sentinel_;  // 1 x d_ctx
};

}  // namespace docsimp
