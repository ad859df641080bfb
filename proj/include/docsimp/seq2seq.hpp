#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "docsimp/errors.hpp"
#include "docsimp/nn.hpp"
#include "docsimp/tokenizer.hpp"

namespace docsimp {

enum class AttentionMode { full, sliding };

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int ffn_dim = 128;
    int max_len = 1024;
    double dropout = 0.1;
    bool context_attention = false;
    bool ctx_dedicated_norm = true;  // dedicated pre-norm before context attention
    AttentionMode attention_mode = AttentionMode::full;
    int sliding_window = 32;
    int global_tokens = 3;  // leading control tokens attend globally in sliding mode
    int d_ctx = 64;
    int vocab_size = 0;
    uint64_t vocab_hash = 0;
    uint64_t seed = 13;

    void validate() const;
    std::map<std::string, std::string> to_kv() const;
    static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

template <typename T>
struct EncLayerP {
    LnP<T> ln1;
    AttnP<T> attn;
    LnP<T> ln2;
    FfnP<T> ffn;
};

template <typename T>
struct DecLayerP {
    LnP<T> ln1;
    AttnP<T> self;
    LnP<T> ln2;
    AttnP<T> cross;
    LnP<T> lnc;     // only when context attention uses a dedicated norm
    AttnP<T> ctx;   // only when context attention is on
    LnP<T> ln3;
    FfnP<T> ffn;
};

// Pre-norm encoder-decoder over token ids. Sequences are processed one item
// at a time (no padding anywhere), which keeps batched and sequential
// drivers bit-identical by construction. The optional context cross-attention
// sublayer sits between encoder cross-attention and the FFN in every decoder
// block; its output projection starts at zero, so a freshly initialized
// context model computes exactly the plain model's function.
template <typename T>
class Seq2SeqModelT {
public:
    using Id = typename Tape<T>::Id;

    struct Trace {
        std::vector<Mat<T>> attention;  // softmax matrices in execution order
    };

    explicit Seq2SeqModelT(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        if (cfg_.vocab_size < kNumSpecials + 1)
            throw ValidationError("seq2seq: vocab_size must cover the special tokens");
        using Init = typename ParamRegistry<T>::Init;
        const uint64_t s = cfg_.seed;
        tok_emb_ = &reg_.add("tok_emb", cfg_.vocab_size, cfg_.d_model, Init::normal, s);
        pos_emb_ = &reg_.add("pos_emb", cfg_.max_len, cfg_.d_model, Init::normal, s);
        for (int l = 0; l < cfg_.n_enc_layers; ++l) {
            const std::string p = "enc." + std::to_string(l);
            EncLayerP<T> lay;
            lay.ln1 = make_ln(reg_, p + ".ln1", cfg_.d_model);
            lay.attn = make_attn(reg_, p + ".attn", cfg_.d_model, cfg_.d_model, s);
            lay.ln2 = make_ln(reg_, p + ".ln2", cfg_.d_model);
            lay.ffn = make_ffn(reg_, p + ".ffn", cfg_.d_model, cfg_.ffn_dim, s);
            enc_.push_back(lay);
        }
        enc_final_ = make_ln(reg_, "enc.final", cfg_.d_model);
        for (int l = 0; l < cfg_.n_dec_layers; ++l) {
            const std::string p = "dec." + std::to_string(l);
            DecLayerP<T> lay;
            lay.ln1 = make_ln(reg_, p + ".ln1", cfg_.d_model);
            lay.self = make_attn(reg_, p + ".self", cfg_.d_model, cfg_.d_model, s);
            lay.ln2 = make_ln(reg_, p + ".ln2", cfg_.d_model);
            lay.cross = make_attn(reg_, p + ".cross", cfg_.d_model, cfg_.d_model, s);
            if (cfg_.context_attention) {
                if (cfg_.ctx_dedicated_norm) lay.lnc = make_ln(reg_, p + ".lnc", cfg_.d_model);
                lay.ctx = make_attn(reg_, p + ".ctx", cfg_.d_model, cfg_.d_ctx, s,
                                    /*zero_out=*/true);
            }
            lay.ln3 = make_ln(reg_, p + ".ln3", cfg_.d_model);
            lay.ffn = make_ffn(reg_, p + ".ffn", cfg_.d_model, cfg_.ffn_dim, s);
            dec_.push_back(lay);
        }
        dec_final_ = make_ln(reg_, "dec.final", cfg_.d_model);
        out_proj_ = make_linear(reg_, "out_proj", cfg_.d_model, cfg_.vocab_size, s);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry<T>& params() { return reg_; }
    const ParamRegistry<T>& params() const { return reg_; }
    int64_t count_params() const { return reg_.count(); }

    Id embed(Tape<T>& t, const std::vector<int>& ids, const DropCfg& drop) {
        if (ids.empty()) throw ValidationError("seq2seq: empty id sequence");
        if (static_cast<int>(ids.size()) > cfg_.max_len)
            throw ValidationError("seq2seq: sequence exceeds max_len");
        std::vector<int> pos(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<int>(i);
        Id x = t.add(t.gather_rows(t.leaf(*tok_emb_), ids),
                     t.gather_rows(t.leaf(*pos_emb_), pos));
        return apply_dropout(t, x, drop);
    }

    Id encode(Tape<T>& t, const std::vector<int>& src_ids, const DropCfg& drop,
              Trace* trace = nullptr) {
        Id x = embed(t, src_ids, drop);
        const int n = static_cast<int>(src_ids.size());
        std::optional<Mat<T>> mask;
        if (cfg_.attention_mode == AttentionMode::sliding)
            mask = sliding_mask<T>(n, cfg_.sliding_window, cfg_.global_tokens);
        for (auto& lay : enc_) {
            std::vector<Id> probs;
            Id n1 = layer_norm(t, x, lay.ln1);
            Id h = attention(t, n1, n1, lay.attn, cfg_.n_heads, mask ? &*mask : nullptr,
                             trace ? &probs : nullptr);
            record(t, trace, probs);
            x = t.add(x, apply_dropout(t, h, drop));
            Id f = ffn(t, layer_norm(t, x, lay.ln2), lay.ffn);
            x = t.add(x, apply_dropout(t, f, drop));
        }
        return layer_norm(t, x, enc_final_);
    }

    // Full-prefix decoder forward: logits for every target position.
    // ctx_window (rows of d_ctx vectors) is required iff the model has
    // context attention.
    Id decode(Tape<T>& t, Id enc_out, const std::vector<int>& tgt_ids,
              const Mat<T>* ctx_window, const DropCfg& drop, Trace* trace = nullptr) {
        if (cfg_.context_attention && ctx_window == nullptr)
            throw ValidationError("seq2seq: context model needs a context window");
        if (!cfg_.context_attention && ctx_window != nullptr)
            throw ValidationError("seq2seq: plain model given a context window");
        if (ctx_window != nullptr && ctx_window->cols != cfg_.d_ctx)
            throw ValidationError("seq2seq: context window width mismatch");
        if (ctx_window != nullptr && ctx_window->rows < 1)
            throw ValidationError("seq2seq: empty context window");
        Id x = embed(t, tgt_ids, drop);
        const Mat<T> causal = causal_mask<T>(static_cast<int>(tgt_ids.size()));
        Id ctx_in = -1;
        if (ctx_window != nullptr) ctx_in = t.input(*ctx_window);
        for (auto& lay : dec_) {
            std::vector<Id> probs;
            Id n1 = layer_norm(t, x, lay.ln1);
            Id h = attention(t, n1, n1, lay.self, cfg_.n_heads, &causal,
                             trace ? &probs : nullptr);
            record(t, trace, probs);
            x = t.add(x, apply_dropout(t, h, drop));

            probs.clear();
            Id q = layer_norm(t, x, lay.ln2);
            h = attention2(t, q, enc_out, lay.cross, trace ? &probs : nullptr);
            record(t, trace, probs);
            x = t.add(x, apply_dropout(t, h, drop));

            if (cfg_.context_attention) {
                probs.clear();
                Id cq = cfg_.ctx_dedicated_norm ? layer_norm(t, x, lay.lnc)
                                                : layer_norm(t, x, lay.ln2);
                h = attention2(t, cq, ctx_in, lay.ctx, trace ? &probs : nullptr);
                record(t, trace, probs);
                x = t.add(x, apply_dropout(t, h, drop));
            }

            Id f = ffn(t, layer_norm(t, x, lay.ln3), lay.ffn);
            x = t.add(x, apply_dropout(t, f, drop));
        }
        x = layer_norm(t, x, dec_final_);
        return linear(t, x, out_proj_);
    }

    Id forward(Tape<T>& t, const std::vector<int>& src_ids, const std::vector<int>& tgt_ids,
               const Mat<T>* ctx_window, const DropCfg& drop, Trace* trace = nullptr) {
        return decode(t, encode(t, src_ids, drop, trace), tgt_ids, ctx_window, drop, trace);
    }

private:
    Id attention2(Tape<T>& t, Id q_in, Id kv, const AttnP<T>& p, std::vector<Id>* probs) {
        return attention(t, q_in, kv, p, cfg_.n_heads, static_cast<const Mat<T>*>(nullptr),
                         probs);
    }

    void record(Tape<T>& t, Trace* trace, const std::vector<Id>& probs) {
        if (trace == nullptr) return;
        for (Id p : probs) trace->attention.push_back(t.val(p));
    }

    ModelConfig cfg_;
    ParamRegistry<T> reg_;
    Param<T>* tok_emb_;
    Param<T>* pos_emb_;
    std::vector<EncLayerP<T>> enc_;
    LnP<T> enc_final_;
    std::vector<DecLayerP<T>> dec_;
    LnP<T> dec_final_;
    LinearP<T> out_proj_;
};

using Seq2SeqModel = Seq2SeqModelT<float>;

struct GenConfig {
    int beam_size = 5;
    int max_len = 1024;      // generated sequence cap, BOS and EOS included
    bool length_norm = true; // final ranking by logprob / generated tokens
};

struct GenResult {
    std::vector<int> ids;  // BOS ... EOS (EOS absent if the cap cut it off)
    double logprob = 0.0;
};

// Beam search (greedy when beam_size is 1). Step candidates rank by
// cumulative logprob with ties broken by lower beam index then lower token
// id; finished hypotheses rank by normalized score with ties to the earlier
// finisher. Deterministic throughout.
template <typename T>
GenResult generate(Seq2SeqModelT<T>& model, const std::vector<int>& src_ids,
                   const Mat<T>* ctx_window, const GenConfig& gen);

// Lockstep greedy decoding of several items (one forward per item per step;
// batching is a scheduling construct, so results match item-wise generate
// calls bit for bit).
template <typename T>
std::vector<GenResult> generate_batch(Seq2SeqModelT<T>& model,
                                      const std::vector<std::vector<int>>& srcs,
                                      const std::vector<const Mat<T>*>& ctxs,
                                      const GenConfig& gen);

extern template class Seq2SeqModelT<float>;
extern template class Seq2SeqModelT<double>;
extern template GenResult generate<float>(Seq2SeqModelT<float>&, const std::vector<int>&,
                                          const Mat<float>*, const GenConfig&);
extern template GenResult generate<double>(Seq2SeqModelT<double>&, const std::vector<int>&,
                                           const Mat<double>*, const GenConfig&);
extern template std::vector<GenResult> generate_batch<float>(
    Seq2SeqModelT<float>&, const std::vector<std::vector<int>>&,
    const std::vector<const Mat<float>*>&, const GenConfig&);

}  // namespace docsimp
