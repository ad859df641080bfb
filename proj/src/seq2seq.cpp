#include "docsimp/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace docsimp {

void ModelConfig::validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
        throw ValidationError("model config: d_model must be a positive multiple of n_heads");
    if (n_enc_layers < 1 || n_dec_layers < 1)
        throw ValidationError("model config: layer counts must be positive");
    if (ffn_dim < 1) throw ValidationError("model config: ffn_dim must be positive");
    if (max_len < 4) throw ValidationError("model config: max_len must be at least 4");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ValidationError("model config: dropout must lie in [0, 1)");
    if (sliding_window < 1) throw ValidationError("model config: sliding_window must be positive");
    if (global_tokens < 0) throw ValidationError("model config: global_tokens must be >= 0");
    if (d_ctx < 1) throw ValidationError("model config: d_ctx must be positive");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", dropout);
    return {
        {"d_model", std::to_string(d_model)},
        {"n_heads", std::to_string(n_heads)},
        {"n_enc_layers", std::to_string(n_enc_layers)},
        {"n_dec_layers", std::to_string(n_dec_layers)},
        {"ffn_dim", std::to_string(ffn_dim)},
        {"max_len", std::to_string(max_len)},
        {"dropout", buf},
        {"context_attention", context_attention ? "1" : "0"},
        {"ctx_dedicated_norm", ctx_dedicated_norm ? "1" : "0"},
        {"attention_mode", attention_mode == AttentionMode::full ? "full" : "sliding"},
        {"sliding_window", std::to_string(sliding_window)},
        {"global_tokens", std::to_string(global_tokens)},
        {"d_ctx", std::to_string(d_ctx)},
        {"vocab_size", std::to_string(vocab_size)},
        {"vocab_hash", std::to_string(vocab_hash)},
        {"seed", std::to_string(seed)},
    };
}

namespace {

const std::string& kv_get(const std::map<std::string, std::string>& kv, const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ValidationError("model config: missing key '" + k + "'");
    return it->second;
}

}  // namespace

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    c.d_model = std::stoi(kv_get(kv, "d_model"));
    c.n_heads = std::stoi(kv_get(kv, "n_heads"));
    c.n_enc_layers = std::stoi(kv_get(kv, "n_enc_layers"));
    c.n_dec_layers = std::stoi(kv_get(kv, "n_dec_layers"));
    c.ffn_dim = std::stoi(kv_get(kv, "ffn_dim"));
    c.max_len = std::stoi(kv_get(kv, "max_len"));
    c.dropout = std::stod(kv_get(kv, "dropout"));
    c.context_attention = kv_get(kv, "context_attention") == "1";
    c.ctx_dedicated_norm = kv_get(kv, "ctx_dedicated_norm") == "1";
    const std::string& mode = kv_get(kv, "attention_mode");
    if (mode == "full")
        c.attention_mode = AttentionMode::full;
    else if (mode == "sliding")
        c.attention_mode = AttentionMode::sliding;
    else
        throw ValidationError("model config: unknown attention_mode '" + mode + "'");
    c.sliding_window = std::stoi(kv_get(kv, "sliding_window"));
    c.global_tokens = std::stoi(kv_get(kv, "global_tokens"));
    c.d_ctx = std::stoi(kv_get(kv, "d_ctx"));
    c.vocab_size = std::stoi(kv_get(kv, "vocab_size"));
    c.vocab_hash = std::stoull(kv_get(kv, "vocab_hash"));
    c.seed = std::stoull(kv_get(kv, "seed"));
    c.validate();
    return c;
}

namespace {

// Log-softmax of the last logits row, computed in double so host-side beam
// arithmetic has one fixed precision everywhere.
template <typename T>
std::vector<double> last_row_logprobs(const Mat<T>& logits) {
    const T* row = logits.row_ptr(logits.rows - 1);
    double mx = static_cast<double>(row[0]);
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int j = 0; j < logits.cols; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = std::log(sum) + mx;
    std::vector<double> lp(static_cast<size_t>(logits.cols));
    for (int j = 0; j < logits.cols; ++j) lp[static_cast<size_t>(j)] = static_cast<double>(row[j]) - lse;
    return lp;
}

template <typename T>
Mat<T> encoder_value(Seq2SeqModelT<T>& model, const std::vector<int>& src_ids) {
    Tape<T> t(/*grad_enabled=*/false);
    DropCfg off;
    return t.val(model.encode(t, src_ids, off));
}

template <typename T>
std::vector<double> step_logprobs(Seq2SeqModelT<T>& model, const Mat<T>& enc,
                                  const std::vector<int>& prefix, const Mat<T>* ctx) {
    Tape<T> t(/*grad_enabled=*/false);
    DropCfg off;
    auto logits = model.decode(t, t.input(enc), prefix, ctx, off);
    return last_row_logprobs(t.val(logits));
}

struct Hyp {
    std::vector<int> ids;
    double lp = 0.0;
};

double norm_score(const Hyp& h, bool length_norm) {
    const double gen = static_cast<double>(h.ids.size()) - 1.0;  // tokens after BOS
    return length_norm ? h.lp / std::max(gen, 1.0) : h.lp;
}

// Single-item greedy decode; the one greedy code path used by beam_size == 1
// and by the lockstep batch driver, so they cannot drift apart.
template <typename T>
GenResult greedy_one(Seq2SeqModelT<T>& model, const Mat<T>& enc, const Mat<T>* ctx, int cap) {
    GenResult r;
    r.ids = {SpecialTok::kBos};
    for (;;) {
        const std::vector<double> lp = step_logprobs(model, enc, r.ids, ctx);
        int best = 0;
        for (int tok = 1; tok < static_cast<int>(lp.size()); ++tok)
            if (lp[static_cast<size_t>(tok)] > lp[static_cast<size_t>(best)]) best = tok;
        r.ids.push_back(best);
        r.logprob += lp[static_cast<size_t>(best)];
        if (best == SpecialTok::kEos || static_cast<int>(r.ids.size()) >= cap) return r;
    }
}

}  // namespace

template <typename T>
GenResult generate(Seq2SeqModelT<T>& model, const std::vector<int>& src_ids,
                   const Mat<T>* ctx_window, const GenConfig& gen) {
    if (gen.beam_size < 1) throw ValidationError("generate: beam_size must be positive");
    const int cap = std::min(gen.max_len, model.config().max_len);
    if (cap < 2) throw ValidationError("generate: max_len leaves no room to generate");

    const Mat<T> enc = encoder_value(model, src_ids);
    if (gen.beam_size == 1) return greedy_one(model, enc, ctx_window, cap);
    std::vector<Hyp> active{Hyp{{SpecialTok::kBos}, 0.0}};
    std::vector<Hyp> finished;

    while (!active.empty() && static_cast<int>(finished.size()) < gen.beam_size) {
        // (score, beam index, token): ranked best-first with deterministic ties.
        struct Cand {
            double lp;
            int beam;
            int tok;
        };
        std::vector<Cand> cands;
        for (size_t b = 0; b < active.size(); ++b) {
            const std::vector<double> lp = step_logprobs(model, enc, active[b].ids, ctx_window);
            cands.reserve(cands.size() + lp.size());
            for (int tok = 0; tok < static_cast<int>(lp.size()); ++tok)
                cands.push_back({active[b].lp + lp[static_cast<size_t>(tok)],
                                 static_cast<int>(b), tok});
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& c) {
            if (a.lp != c.lp) return a.lp > c.lp;
            if (a.beam != c.beam) return a.beam < c.beam;
            return a.tok < c.tok;
        });
        const size_t keep = std::min(cands.size(), static_cast<size_t>(gen.beam_size));
        std::vector<Hyp> next;
        for (size_t k = 0; k < keep; ++k) {
            Hyp h = active[static_cast<size_t>(cands[k].beam)];
            h.ids.push_back(cands[k].tok);
            h.lp = cands[k].lp;
            if (cands[k].tok == SpecialTok::kEos || static_cast<int>(h.ids.size()) >= cap)
                finished.push_back(std::move(h));
            else
                next.push_back(std::move(h));
        }
        active = std::move(next);
    }
    if (finished.empty()) {
        // Can only happen when every surviving hypothesis was still active at
        // loop exit, which the loop conditions rule out; keep a hard error.
        throw std::logic_error("generate: no finished hypothesis");
    }
    size_t best = 0;
    for (size_t i = 1; i < finished.size(); ++i)
        if (norm_score(finished[i], gen.length_norm) >
            norm_score(finished[best], gen.length_norm))
            best = i;  // ties keep the earlier finisher
    return GenResult{finished[best].ids, finished[best].lp};
}

template <typename T>
std::vector<GenResult> generate_batch(Seq2SeqModelT<T>& model,
                                      const std::vector<std::vector<int>>& srcs,
                                      const std::vector<const Mat<T>*>& ctxs,
                                      const GenConfig& gen) {
    if (srcs.size() != ctxs.size())
        throw ValidationError("generate_batch: source/context count mismatch");
    std::vector<GenResult> out(srcs.size());
    if (gen.beam_size != 1) {
        for (size_t i = 0; i < srcs.size(); ++i) out[i] = generate(model, srcs[i], ctxs[i], gen);
        return out;
    }
    // Greedy items run through the same single-item step loop as beam_size 1,
    // and items never interact, so a batch of one equals a slot of a larger
    // batch bit for bit. That independence is what makes the document-level
    // batched driver provably match the sequential one.
    const int cap = std::min(gen.max_len, model.config().max_len);
    if (cap < 2) throw ValidationError("generate_batch: max_len leaves no room to generate");
    std::vector<Mat<T>> enc;
    enc.reserve(srcs.size());
    for (const auto& s : srcs) enc.push_back(encoder_value(model, s));
    for (size_t i = 0; i < srcs.size(); ++i) out[i] = greedy_one(model, enc[i], ctxs[i], cap);
    return out;
}

template class Seq2SeqModelT<float>;
template class Seq2SeqModelT<double>;
template GenResult generate<float>(Seq2SeqModelT<float>&, const std::vector<int>&,
                                   const Mat<float>*, const GenConfig&);
template GenResult generate<double>(Seq2SeqModelT<double>&, const std::vector<int>&,
                                    const Mat<double>*, const GenConfig&);
template std::vector<GenResult> generate_batch<float>(Seq2SeqModelT<float>&,
                                                      const std::vector<std::vector<int>>&,
                                                      const std::vector<const Mat<float>*>&,
                                                      const GenConfig&);

}  // namespace docsimp
