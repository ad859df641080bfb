#include "docsimp/context.hpp"

#include <cassert>

#include "docsimp/errors.hpp"

namespace docsimp {

void DynamicStore::set(int i, std::vector<float> v) {
    auto& slot = slots_.at(static_cast<size_t>(i));
    if (slot.has_value())
        throw std::logic_error("context: store entry " + std::to_string(i) +
                               " written twice");
    slot = std::move(v);
}

ContextEncoder::ContextEncoder(const ContextEncoderConfig& cfg, const Tokenizer& tok)
    : cfg_(cfg), tok_(&tok) {
    if (cfg_.d_ctx < 1 || cfg_.radius < 0)
        throw ValidationError("context: bad encoder dimensions");
    if (cfg_.vocab_size == 0) cfg_.vocab_size = tok.vocab_size();
    if (cfg_.vocab_hash == 0) cfg_.vocab_hash = tok.vocab_hash();
    if (cfg_.vocab_size != tok.vocab_size() || cfg_.vocab_hash != tok.vocab_hash())
        throw ValidationError("context: tokenizer does not match encoder vocabulary");
    using Init = ParamRegistry<float>::Init;
    tok_emb_ = &reg_.add("ctx.tok_emb", cfg_.vocab_size, cfg_.d_ctx, Init::normal, cfg_.seed);
    pos_emb_ = &reg_.add("ctx.pos_emb", 2 * cfg_.radius + 1, cfg_.d_ctx, Init::normal,
                         cfg_.seed);
    flag_emb_ = &reg_.add("ctx.flag_emb", 2, cfg_.d_ctx, Init::normal, cfg_.seed);
    sentinel_ = &reg_.add("ctx.sentinel", 1, cfg_.d_ctx, Init::normal, cfg_.seed);
}

std::vector<float> ContextEncoder::encode_sentence(const std::string& text) const {
    const auto ids = tok_->encode_body(text);
    if (ids.empty())
        throw ValidationError("context: cannot encode an empty sentence");
    std::vector<float> v(static_cast<size_t>(cfg_.d_ctx), 0.0f);
    for (int id : ids) {
        const float* row = tok_emb_->value.row_ptr(id);
        for (int j = 0; j < cfg_.d_ctx; ++j) v[static_cast<size_t>(j)] += row[j];
    }
    const float inv = 1.0f / static_cast<float>(ids.size());
    for (auto& x : v) x *= inv;
    return v;
}

std::vector<float> ContextEncoder::encode_output(const std::string& text) const {
    return Tokenizer::split_ws(text).empty() ? sentinel_vector() : encode_sentence(text);
}

std::vector<float> ContextEncoder::sentinel_vector() const {
    return {sentinel_->value.a.begin(), sentinel_->value.a.end()};
}

std::vector<float> ContextEncoder::slot_vector(const std::vector<float>& base, int offset,
                                               SlotStatus flag) const {
    std::vector<float> v = base;
    const float* pos = pos_emb_->value.row_ptr(offset + cfg_.radius);
    for (int j = 0; j < cfg_.d_ctx; ++j) v[static_cast<size_t>(j)] += pos[j];
    if (cfg_.flag_embedding) {
        const float* fl = flag_emb_->value.row_ptr(static_cast<int>(flag));
        for (int j = 0; j < cfg_.d_ctx; ++j) v[static_cast<size_t>(j)] += fl[j];
    }
    return v;
}

ContextWindow ContextEncoder::build_window(const Document& doc, int i,
                                           const DynamicStore* store) const {
    const int n = static_cast<int>(doc.sentences.size());
    if (i < 0 || i >= n) throw ValidationError("context: window index out of range");
    if (store != nullptr && store->size() != n)
        throw ValidationError("context: store size does not match document");
    const int r = cfg_.radius;
    ContextWindow w;
    const int lo = std::max(-r, -i);
    const int hi = std::min(r, n - 1 - i);
    w.vectors = Mat<float>(hi - lo + 1, cfg_.d_ctx);
    for (int k = lo; k <= hi; ++k) {
        const int idx = i + k;
        SlotStatus flag = SlotStatus::complex_src;
        std::vector<float> base;
        if (k < 0 && store != nullptr && store->has(idx)) {
            base = store->get(idx);
            flag = SlotStatus::simplified;
        } else {
            base = encode_sentence(doc.sentences[static_cast<size_t>(idx)]);
        }
        const auto v = slot_vector(base, k, flag);
        std::copy(v.begin(), v.end(), w.vectors.row_ptr(k - lo));
        w.offsets.push_back(k);
        w.flags.push_back(flag);
    }
    return w;
}

ContextWindow ContextEncoder::build_window_paragraph(const Document& doc, int i,
                                                     const DynamicStore* store) const {
    const int n = static_cast<int>(doc.sentences.size());
    if (i < 0 || i >= n) throw ValidationError("context: window index out of range");
    if (store != nullptr && store->size() != n)
        throw ValidationError("context: store size does not match document");
    const int r = cfg_.radius;
    const int j = doc.paragraph_start(i);
    ContextWindow w;
    const int lo = std::max(-r, -i);
    const int hi = std::min(r, n - 1 - i);
    w.vectors = Mat<float>(hi - lo + 1, cfg_.d_ctx);
    for (int k = lo; k <= hi; ++k) {
        const int idx = i + k;
        SlotStatus flag = SlotStatus::complex_src;
        std::vector<float> base;
        if (idx < j && store != nullptr && store->has(idx)) {
            assert(idx < j);  // store reads never reach the current paragraph
            base = store->get(idx);
            flag = SlotStatus::simplified;
        } else {
            base = encode_sentence(doc.sentences[static_cast<size_t>(idx)]);
        }
        const auto v = slot_vector(base, k, flag);
        std::copy(v.begin(), v.end(), w.vectors.row_ptr(k - lo));
        w.offsets.push_back(k);
        w.flags.push_back(flag);
    }
    return w;
}

Tape<float>::Id ContextEncoder::sentence_on_tape(Tape<float>& t,
                                                 const std::vector<int>& token_ids) {
    if (token_ids.empty())
        throw ValidationError("context: cannot encode an empty sentence");
    return t.mean_rows(t.gather_rows(t.leaf(*tok_emb_), token_ids));
}

Tape<float>::Id ContextEncoder::window_on_tape(Tape<float>& t,
                                               const std::vector<SlotSpec>& slots) {
    std::vector<Tape<float>::Id> rows;
    rows.reserve(slots.size());
    const auto emb = t.leaf(*tok_emb_);
    const auto pos = t.leaf(*pos_emb_);
    const auto flg = t.leaf(*flag_emb_);
    const auto sen = t.leaf(*sentinel_);
    for (const auto& s : slots) {
        Tape<float>::Id base;
        if (s.sentinel) {
            base = sen;
        } else {
            if (s.token_ids.empty())
                throw ValidationError("context: cannot encode an empty sentence");
            base = t.mean_rows(t.gather_rows(emb, s.token_ids));
        }
        auto v = t.add(base, t.slice_rows(pos, s.offset + cfg_.radius, 1));
        if (cfg_.flag_embedding)
            v = t.add(v, t.slice_rows(flg, static_cast<int>(s.flag), 1));
        rows.push_back(v);
    }
    return t.concat_rows(rows);
}

}  // namespace docsimp
