#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "docsimp/context.hpp"
#include "docsimp/corpus.hpp"
#include "docsimp/nn.hpp"
#include "docsimp/tokenizer.hpp"

namespace docsimp {

struct PlannerConfig {
    int d_ctx = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_hidden = 64;
    int d_rl = 8;
    int radius = 13;
    bool flag_embedding = true;
    int vocab_size = 0;
    uint64_t vocab_hash = 0;
    uint64_t seed = 13;

    void validate() const;
    std::map<std::string, std::string> to_kv() const;
    static PlannerConfig from_kv(const std::map<std::string, std::string>& kv);
};

struct PlanPrediction {
    Op op = Op::copy;
    std::array<double, 4> probs{};  // indexed by Op value
};

// Sentence-operation classifier: a small transformer encoder (n_layers,
// width d_ctx) runs over the window slots, whose positional embeddings let
// it tell left from right; its output at the offset-0 slot is concatenated
// with a mean token encoding of the center sentence and a reading-level
// embedding, and a two-layer head maps to the four operations. The head
// output layer starts at zero, so an untrained planner is exactly uniform.
// It owns its context encoder and the two are trained jointly; the
// simplifier's encoder is a separate instance.
class Planner {
public:
    Planner(const PlannerConfig& cfg, const Tokenizer& tok);

    const PlannerConfig& config() const { return cfg_; }
    ContextEncoder& context_encoder() { return *enc_; }
    const ContextEncoder& context_encoder() const { return *enc_; }
    ParamRegistry<float>& head_params() { return reg_; }

    // Head plus context-encoder parameters, in checkpoint order.
    std::vector<Param<float>*> all_params();
    int64_t count_params();

    // Training path: window already on the tape (L x d_ctx), center_row the
    // slot at offset 0, center_ids the body token ids of the center
    // sentence. Returns 1 x 4 logits.
    Tape<float>::Id logits_on_tape(Tape<float>& t, Tape<float>::Id window,
                                   const std::vector<int>& center_ids, int center_row,
                                   int reading_level);

    // Inference path; same arithmetic on a grad-free tape. sentence is the
    // center (complex) sentence the window was built for.
    PlanPrediction predict(const std::string& sentence, const ContextWindow& w,
                           int reading_level);

private:
    struct EncLayer {
        LnP<float> ln1;
        AttnP<float> attn;
        LnP<float> ln2;
        FfnP<float> ffn;
    };

    PlannerConfig cfg_;
    std::unique_ptr<ContextEncoder> enc_;
    ParamRegistry<float> reg_;
    Param<float>* rl_emb_;  // 5 x d_rl
    std::vector<EncLayer> layers_;
    LnP<float> enc_final_;
    LinearP<float> mlp_up_;    // (2 d_ctx + d_rl) -> d_hidden
    LinearP<float> mlp_down_;  // d_hidden -> 4, zero-initialized
};

// Static plan for one document at a requested reading level: windows built
// by the planner's own encoder with no dynamic store, one operation per
// sentence.
Plan plan_document_static(Planner& planner, const Document& doc, int target_level);

}  // namespace docsimp
