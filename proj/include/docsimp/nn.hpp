#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "docsimp/tape.hpp"

namespace docsimp {

// Owns parameters in registration order (the checkpoint tensor order).
// Initialization draws a dedicated RNG stream per tensor, seeded from
// (seed, name): adding or removing tensors never shifts the draws of the
// others. The zero-init ablation test depends on this.
template <typename T>
class ParamRegistry {
public:
    enum class Init { normal, zeros, ones };

    Param<T>& add(const std::string& name, int rows, int cols, Init init, uint64_t seed) {
        store_.emplace_back();
        Param<T>& p = store_.back();
        p.name = name;
        p.value = Mat<T>(rows, cols);
        switch (init) {
            case Init::zeros:
                break;
            case Init::ones:
                p.value.fill(T(1));
                break;
            case Init::normal: {
                Rng rng(fnv1a_str(name) ^ (seed * 0x9E3779B97F4A7C15ull));
                for (auto& v : p.value.a) v = T(0.02 * rng.normal());
                break;
            }
        }
        order_.push_back(&p);
        return p;
    }

    const std::vector<Param<T>*>& params() const { return order_; }

    Param<T>* find(const std::string& name) const {
        for (Param<T>* p : order_)
            if (p->name == name) return p;
        return nullptr;
    }

    int64_t count() const {
        int64_t n = 0;
        for (const Param<T>* p : order_) n += static_cast<int64_t>(p->value.size());
        return n;
    }

    void zero_grads() {
        for (Param<T>* p : order_) {
            p->ensure_grad();
            p->grad.zero();
        }
    }

private:
    std::deque<Param<T>> store_;  // deque: stable addresses under growth
    std::vector<Param<T>*> order_;
};

template <typename T>
struct LinearP {
    Param<T>* w = nullptr;  // in x out
    Param<T>* b = nullptr;  // 1 x out
};

template <typename T>
struct LnP {
    Param<T>* g = nullptr;
    Param<T>* b = nullptr;
};

template <typename T>
struct AttnP {
    LinearP<T> q, k, v, o;
};

template <typename T>
struct FfnP {
    LinearP<T> up, down;
};

template <typename T>
LinearP<T> make_linear(ParamRegistry<T>& reg, const std::string& prefix, int in, int out,
                       uint64_t seed, bool zero_init = false) {
    using Init = typename ParamRegistry<T>::Init;
    LinearP<T> l;
    l.w = &reg.add(prefix + ".w", in, out, zero_init ? Init::zeros : Init::normal, seed);
    l.b = &reg.add(prefix + ".b", 1, out, Init::zeros, seed);
    return l;
}

template <typename T>
LnP<T> make_ln(ParamRegistry<T>& reg, const std::string& prefix, int dim) {
    using Init = typename ParamRegistry<T>::Init;
    LnP<T> ln;
    ln.g = &reg.add(prefix + ".g", 1, dim, Init::ones, 0);
    ln.b = &reg.add(prefix + ".b", 1, dim, Init::zeros, 0);
    return ln;
}

// d_kv is the width of the key/value input stream (d_model for token
// attention, the context vector width for context cross-attention).
// zero_out zero-initializes the output projection; with it the whole
// sublayer contributes an exact zero to the residual stream.
template <typename T>
AttnP<T> make_attn(ParamRegistry<T>& reg, const std::string& prefix, int d_model, int d_kv,
                   uint64_t seed, bool zero_out = false) {
    AttnP<T> a;
    a.q = make_linear(reg, prefix + ".q", d_model, d_model, seed);
    a.k = make_linear(reg, prefix + ".k", d_kv, d_model, seed);
    a.v = make_linear(reg, prefix + ".v", d_kv, d_model, seed);
    a.o = make_linear(reg, prefix + ".o", d_model, d_model, seed, zero_out);
    return a;
}

template <typename T>
FfnP<T> make_ffn(ParamRegistry<T>& reg, const std::string& prefix, int d_model, int d_ffn,
                 uint64_t seed) {
    FfnP<T> f;
    f.up = make_linear(reg, prefix + ".up", d_model, d_ffn, seed);
    f.down = make_linear(reg, prefix + ".down", d_ffn, d_model, seed);
    return f;
}

struct DropCfg {
    double p = 0.0;
    Rng* rng = nullptr;  // null or p == 0 disables dropout

    bool active() const { return rng != nullptr && p > 0.0; }
};

template <typename T>
typename Tape<T>::Id linear(Tape<T>& t, typename Tape<T>::Id x, const LinearP<T>& l) {
    return t.add_rowvec(t.matmul(x, t.leaf(*l.w)), t.leaf(*l.b));
}

template <typename T>
typename Tape<T>::Id apply_dropout(Tape<T>& t, typename Tape<T>::Id x, const DropCfg& d) {
    return d.active() ? t.dropout(x, d.p, *d.rng) : x;
}

// Multi-head scaled dot-product attention. mask (Tq x Tk additive, 0 or
// -1e30) may be null. If probs_out is non-null the per-head softmax node ids
// are appended (test instrumentation).
template <typename T>
typename Tape<T>::Id attention(Tape<T>& t, typename Tape<T>::Id q_in,
                               typename Tape<T>::Id kv_in, const AttnP<T>& p, int n_heads,
                               const Mat<T>* mask,
                               std::vector<typename Tape<T>::Id>* probs_out = nullptr) {
    using Id = typename Tape<T>::Id;
    const Id q = linear(t, q_in, p.q);
    const Id k = linear(t, kv_in, p.k);
    const Id v = linear(t, kv_in, p.v);
    const int d_model = t.val(q).cols;
    const int hd = d_model / n_heads;
    const T scale = T(1) / std::sqrt(T(hd));
    std::vector<Id> heads;
    heads.reserve(n_heads);
    for (int h = 0; h < n_heads; ++h) {
        const Id qh = t.slice_cols(q, h * hd, hd);
        const Id kh = t.slice_cols(k, h * hd, hd);
        const Id vh = t.slice_cols(v, h * hd, hd);
        Id scores = t.mul_const(t.matmul_nt(qh, kh), scale);
        if (mask != nullptr) scores = t.add_mask(scores, *mask);
        const Id probs = t.softmax_rows(scores);
        if (probs_out != nullptr) probs_out->push_back(probs);
        heads.push_back(t.matmul(probs, vh));
    }
    return linear(t, t.concat_cols(heads), p.o);
}

template <typename T>
typename Tape<T>::Id ffn(Tape<T>& t, typename Tape<T>::Id x, const FfnP<T>& f) {
    return linear(t, t.relu(linear(t, x, f.up)), f.down);
}

template <typename T>
typename Tape<T>::Id layer_norm(Tape<T>& t, typename Tape<T>::Id x, const LnP<T>& ln) {
    return t.layer_norm(x, t.leaf(*ln.g), t.leaf(*ln.b));
}

// Additive masks: 0 where attention is allowed, -1e30 where not.
template <typename T>
Mat<T> causal_mask(int n) {
    Mat<T> m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m(i, j) = T(-1e30);
    return m;
}

// Sliding-window self-attention mask: position pairs within +-w attend, and
// the first n_global positions attend everywhere and are attended from
// everywhere.
template <typename T>
Mat<T> sliding_mask(int n, int w, int n_global) {
    Mat<T> m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const bool local = std::abs(i - j) <= w;
            const bool global = i < n_global || j < n_global;
            if (!local && !global) m(i, j) = T(-1e30);
        }
    return m;
}

}  // namespace docsimp
