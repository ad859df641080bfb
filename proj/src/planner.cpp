#include "docsimp/planner.hpp"

#include <cmath>

#include "docsimp/errors.hpp"

namespace docsimp {

void PlannerConfig::validate() const {
    if (d_ctx < 1 || d_hidden < 1 || d_rl < 1)
        throw ValidationError("planner config: widths must be positive");
    if (radius < 1) throw ValidationError("planner config: radius must be positive");
    if (n_layers < 1) throw ValidationError("planner config: needs at least one layer");
    if (n_heads < 1 || d_ctx % n_heads != 0)
        throw ValidationError("planner config: n_heads must divide d_ctx");
}

std::map<std::string, std::string> PlannerConfig::to_kv() const {
    return {
        {"d_ctx", std::to_string(d_ctx)},
        {"n_heads", std::to_string(n_heads)},
        {"n_layers", std::to_string(n_layers)},
        {"d_hidden", std::to_string(d_hidden)},
        {"d_rl", std::to_string(d_rl)},
        {"radius", std::to_string(radius)},
        {"flag_embedding", flag_embedding ? "1" : "0"},
        {"vocab_size", std::to_string(vocab_size)},
        {"vocab_hash", std::to_string(vocab_hash)},
        {"seed", std::to_string(seed)},
    };
}

namespace {

const std::string& kv_get(const std::map<std::string, std::string>& kv, const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ValidationError("planner config: missing key '" + k + "'");
    return it->second;
}

}  // namespace

PlannerConfig PlannerConfig::from_kv(const std::map<std::string, std::string>& kv) {
    PlannerConfig c;
    c.d_ctx = std::stoi(kv_get(kv, "d_ctx"));
    c.n_heads = std::stoi(kv_get(kv, "n_heads"));
    c.n_layers = std::stoi(kv_get(kv, "n_layers"));
    c.d_hidden = std::stoi(kv_get(kv, "d_hidden"));
    c.d_rl = std::stoi(kv_get(kv, "d_rl"));
    c.radius = std::stoi(kv_get(kv, "radius"));
    c.flag_embedding = kv_get(kv, "flag_embedding") == "1";
    c.vocab_size = std::stoi(kv_get(kv, "vocab_size"));
    c.vocab_hash = std::stoull(kv_get(kv, "vocab_hash"));
    c.seed = std::stoull(kv_get(kv, "seed"));
    c.validate();
    return c;
}

Planner::Planner(const PlannerConfig& cfg, const Tokenizer& tok) : cfg_(cfg) {
    cfg_.validate();
    ContextEncoderConfig ec;
    ec.d_ctx = cfg_.d_ctx;
    ec.radius = cfg_.radius;
    ec.flag_embedding = cfg_.flag_embedding;
    ec.vocab_size = cfg_.vocab_size;
    ec.vocab_hash = cfg_.vocab_hash;
    ec.seed = cfg_.seed;
    enc_ = std::make_unique<ContextEncoder>(ec, tok);
    cfg_.vocab_size = enc_->config().vocab_size;
    cfg_.vocab_hash = enc_->config().vocab_hash;

    using Init = ParamRegistry<float>::Init;
    const uint64_t s = cfg_.seed;
    rl_emb_ = &reg_.add("plan.rl_emb", kNumReadingLevels, cfg_.d_rl, Init::normal, s);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const std::string p = "plan.enc." + std::to_string(l);
        EncLayer lay;
        lay.ln1 = make_ln(reg_, p + ".ln1", cfg_.d_ctx);
        lay.attn = make_attn(reg_, p + ".attn", cfg_.d_ctx, cfg_.d_ctx, s);
        lay.ln2 = make_ln(reg_, p + ".ln2", cfg_.d_ctx);
        lay.ffn = make_ffn(reg_, p + ".ffn", cfg_.d_ctx, cfg_.d_hidden, s);
        layers_.push_back(lay);
    }
    enc_final_ = make_ln(reg_, "plan.enc.final", cfg_.d_ctx);
    mlp_up_ = make_linear(reg_, "plan.mlp.up", 2 * cfg_.d_ctx + cfg_.d_rl, cfg_.d_hidden, s);
    mlp_down_ = make_linear(reg_, "plan.mlp.down", cfg_.d_hidden, kNumOps, s,
                            /*zero_init=*/true);
}

std::vector<Param<float>*> Planner::all_params() {
    std::vector<Param<float>*> out = reg_.params();
    const auto& ctx = enc_->params().params();
    out.insert(out.end(), ctx.begin(), ctx.end());
    return out;
}

int64_t Planner::count_params() {
    int64_t n = 0;
    for (const Param<float>* p : all_params()) n += static_cast<int64_t>(p->value.size());
    return n;
}

Tape<float>::Id Planner::logits_on_tape(Tape<float>& t, Tape<float>::Id window,
                                        const std::vector<int>& center_ids, int center_row,
                                        int reading_level) {
    if (reading_level < 0 || reading_level >= kNumReadingLevels)
        throw ValidationError("planner: reading level out of range");
    const Mat<float>& wv = t.val(window);
    if (wv.cols != cfg_.d_ctx) throw ValidationError("planner: window width mismatch");
    if (center_row < 0 || center_row >= wv.rows)
        throw ValidationError("planner: center row out of range");
    if (center_ids.empty())
        throw ValidationError("planner: center sentence has no tokens");
    using Id = Tape<float>::Id;
    Id x = window;
    for (auto& lay : layers_) {
        const Id n1 = layer_norm(t, x, lay.ln1);
        x = t.add(x, attention(t, n1, n1, lay.attn, cfg_.n_heads,
                               static_cast<const Mat<float>*>(nullptr)));
        x = t.add(x, ffn(t, layer_norm(t, x, lay.ln2), lay.ffn));
    }
    x = layer_norm(t, x, enc_final_);
    const Id pooled = t.slice_rows(x, center_row, 1);
    const Id sent = enc_->sentence_on_tape(t, center_ids);
    const Id rl = t.gather_rows(t.leaf(*rl_emb_), {reading_level});
    const Id cat = t.concat_cols({pooled, sent, rl});
    return linear(t, t.relu(linear(t, cat, mlp_up_)), mlp_down_);
}

PlanPrediction Planner::predict(const std::string& sentence, const ContextWindow& w,
                                int reading_level) {
    Tape<float> t(/*grad_enabled=*/false);
    const auto ids = enc_->tokenizer().encode_body(sentence);
    const auto logits =
        t.val(logits_on_tape(t, t.input(w.vectors), ids, w.center(), reading_level));
    PlanPrediction p;
    double mx = logits.a[0];
    for (int j = 1; j < kNumOps; ++j) mx = std::max(mx, static_cast<double>(logits.a[j]));
    double sum = 0.0;
    for (int j = 0; j < kNumOps; ++j) {
        p.probs[static_cast<size_t>(j)] = std::exp(static_cast<double>(logits.a[j]) - mx);
        sum += p.probs[static_cast<size_t>(j)];
    }
    int best = 0;
    for (int j = 0; j < kNumOps; ++j) {
        p.probs[static_cast<size_t>(j)] /= sum;
        if (p.probs[static_cast<size_t>(j)] > p.probs[static_cast<size_t>(best)]) best = j;
    }
    p.op = static_cast<Op>(best);
    return p;
}

Plan plan_document_static(Planner& planner, const Document& doc, int target_level) {
    Plan plan;
    plan.doc_id = doc.doc_id;
    plan.ops.reserve(doc.sentences.size());
    for (int i = 0; i < static_cast<int>(doc.sentences.size()); ++i) {
        const ContextWindow w = planner.context_encoder().build_window(doc, i, nullptr);
        plan.ops.push_back(planner.predict(doc.sentences[static_cast<size_t>(i)], w,
                                           target_level).op);
    }
    return plan;
}

}  // namespace docsimp
