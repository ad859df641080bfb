#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "docsimp/kernels.hpp"
#include "docsimp/mat.hpp"
#include "docsimp/rng.hpp"

namespace docsimp {

// A named trainable tensor. Gradient and optimizer slots live beside the
// value so the trainer can walk a flat registry.
template <typename T>
struct Param {
    std::string name;
    Mat<T> value;
    Mat<T> grad;
    Mat<T> m, v;  // Adam moments, sized on first optimizer step

    void ensure_grad() {
        if (grad.rows != value.rows || grad.cols != value.cols)
            grad = Mat<T>(value.rows, value.cols);
    }
};

// Reverse-mode tape over Mat<T>. Nodes own their values; backward closures
// capture node ids, never references, so the node vector may reallocate.
// With grads disabled the same ops run value-only, which keeps training and
// inference forward arithmetic bit-identical.
template <typename T>
class Tape {
public:
    using Id = int;

    explicit Tape(bool grad_enabled = true) : grad_(grad_enabled) {}

    bool grad_enabled() const { return grad_; }

    const Mat<T>& val(Id id) const { return nodes_[id].val; }
    Mat<T>& grad(Id id) { return nodes_[id].grad; }

    Id input(Mat<T> v) {
        return push(std::move(v), nullptr);
    }

    Id leaf(Param<T>& p) {
        Id id = push(Mat<T>(p.value), nullptr);
        if (grad_) {
            p.ensure_grad();
            Param<T>* pp = &p;
            nodes_[id].back = [this, id, pp] {
                const Mat<T>& g = nodes_[id].grad;
                for (size_t i = 0; i < g.size(); ++i) pp->grad.a[i] += g.a[i];
            };
        }
        return id;
    }

    Id matmul(Id a, Id b) {
        Mat<T> out(nodes_[a].val.rows, nodes_[b].val.cols);
        kernels::gemm_nn(nodes_[a].val, nodes_[b].val, out);
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, a, b] {
            kernels::gemm_nt(nodes_[id].grad, nodes_[b].val, nodes_[a].grad, true);
            kernels::gemm_tn(nodes_[a].val, nodes_[id].grad, nodes_[b].grad, true);
        };
        return id;
    }

    // out = a * b^T
    Id matmul_nt(Id a, Id b) {
        Mat<T> out(nodes_[a].val.rows, nodes_[b].val.rows);
        kernels::gemm_nt(nodes_[a].val, nodes_[b].val, out);
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, a, b] {
            kernels::gemm_nn(nodes_[id].grad, nodes_[b].val, nodes_[a].grad, true);
            kernels::gemm_tn(nodes_[id].grad, nodes_[a].val, nodes_[b].grad, true);
        };
        return id;
    }

    Id add(Id a, Id b) {
        Mat<T> out(nodes_[a].val.rows, nodes_[a].val.cols);
        kernels::add(nodes_[a].val, nodes_[b].val, out);
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, a, b] {
            accum(nodes_[a].grad, nodes_[id].grad);
            accum(nodes_[b].grad, nodes_[id].grad);
        };
        return id;
    }

    // x (R x C) + bias (1 x C), broadcast over rows.
    Id add_rowvec(Id x, Id bias) {
        const Mat<T>& xv = nodes_[x].val;
        const Mat<T>& bv = nodes_[bias].val;
        if (bv.rows != 1 || bv.cols != xv.cols)
            throw std::invalid_argument("add_rowvec: shape mismatch");
        Mat<T> out(xv.rows, xv.cols);
        for (int i = 0; i < xv.rows; ++i)
            for (int j = 0; j < xv.cols; ++j) out(i, j) = xv(i, j) + bv.a[j];
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x, bias] {
            const Mat<T>& g = nodes_[id].grad;
            accum(nodes_[x].grad, g);
            Mat<T>& gb = nodes_[bias].grad;
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) gb.a[j] += g(i, j);
        };
        return id;
    }

    // out = x + m, m constant (attention masks).
    Id add_mask(Id x, const Mat<T>& m) {
        Mat<T> out(nodes_[x].val.rows, nodes_[x].val.cols);
        kernels::add(nodes_[x].val, m, out);
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x] { accum(nodes_[x].grad, nodes_[id].grad); };
        return id;
    }

    Id mul_const(Id x, T c) {
        Mat<T> out = nodes_[x].val;
        for (auto& v : out.a) v *= c;
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x, c] {
            const Mat<T>& g = nodes_[id].grad;
            Mat<T>& gx = nodes_[x].grad;
            for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i] * c;
        };
        return id;
    }

    Id relu(Id x) {
        Mat<T> out(nodes_[x].val.rows, nodes_[x].val.cols);
        kernels::relu(nodes_[x].val, out);
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x] {
            const Mat<T>& g = nodes_[id].grad;
            const Mat<T>& xv = nodes_[x].val;
            Mat<T>& gx = nodes_[x].grad;
            for (size_t i = 0; i < g.size(); ++i)
                if (xv.a[i] > T(0)) gx.a[i] += g.a[i];
        };
        return id;
    }

    Id layer_norm(Id x, Id gamma, Id beta) {
        const Mat<T>& xv = nodes_[x].val;
        Mat<T> out(xv.rows, xv.cols);
        kernels::layer_norm_rows(xv, nodes_[gamma].val, nodes_[beta].val, out, kLnEps);
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x, gamma, beta] {
            const Mat<T>& xv2 = nodes_[x].val;
            const Mat<T>& gm = nodes_[gamma].val;
            const Mat<T>& dy = nodes_[id].grad;
            Mat<T>& dx = nodes_[x].grad;
            Mat<T>& dg = nodes_[gamma].grad;
            Mat<T>& db = nodes_[beta].grad;
            const int n = xv2.cols;
            for (int i = 0; i < xv2.rows; ++i) {
                const T* xi = xv2.row_ptr(i);
                const T* dyi = dy.row_ptr(i);
                T mean = T(0);
                for (int j = 0; j < n; ++j) mean += xi[j];
                mean /= T(n);
                T var = T(0);
                for (int j = 0; j < n; ++j) {
                    const T d = xi[j] - mean;
                    var += d * d;
                }
                var /= T(n);
                const T rstd = T(1) / std::sqrt(var + kLnEps);
                T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
                for (int j = 0; j < n; ++j) {
                    const T xhat = (xi[j] - mean) * rstd;
                    const T dxhat = dyi[j] * gm.a[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    dg.a[j] += dyi[j] * xhat;
                    db.a[j] += dyi[j];
                }
                for (int j = 0; j < n; ++j) {
                    const T xhat = (xi[j] - mean) * rstd;
                    const T dxhat = dyi[j] * gm.a[j];
                    dx.row_ptr(i)[j] +=
                        rstd * (dxhat - sum_dxhat / T(n) - xhat * sum_dxhat_xhat / T(n));
                }
            }
        };
        return id;
    }

    Id softmax_rows(Id x) {
        Mat<T> out(nodes_[x].val.rows, nodes_[x].val.cols);
        kernels::softmax_rows(nodes_[x].val, out);
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x] {
            const Mat<T>& y = nodes_[id].val;
            const Mat<T>& dy = nodes_[id].grad;
            Mat<T>& dx = nodes_[x].grad;
            for (int i = 0; i < y.rows; ++i) {
                const T* yi = y.row_ptr(i);
                const T* dyi = dy.row_ptr(i);
                T dot = T(0);
                for (int j = 0; j < y.cols; ++j) dot += dyi[j] * yi[j];
                T* dxi = dx.row_ptr(i);
                for (int j = 0; j < y.cols; ++j) dxi[j] += (dyi[j] - dot) * yi[j];
            }
        };
        return id;
    }

    // Inverted dropout; mask drawn elementwise from rng. p == 0 is identity.
    Id dropout(Id x, double p, Rng& rng) {
        if (p <= 0.0) return x;
        const Mat<T>& xv = nodes_[x].val;
        auto mask = std::make_shared<Mat<T>>(xv.rows, xv.cols);
        const T scale = T(1.0 / (1.0 - p));
        for (size_t i = 0; i < mask->size(); ++i)
            mask->a[i] = rng.uniform() >= p ? scale : T(0);
        Mat<T> out(xv.rows, xv.cols);
        for (size_t i = 0; i < out.size(); ++i) out.a[i] = xv.a[i] * mask->a[i];
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x, mask] {
            const Mat<T>& g = nodes_[id].grad;
            Mat<T>& gx = nodes_[x].grad;
            for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i] * mask->a[i];
        };
        return id;
    }

    Id gather_rows(Id emb, std::vector<int> ids) {
        const Mat<T>& ev = nodes_[emb].val;
        Mat<T> out(static_cast<int>(ids.size()), ev.cols);
        for (size_t r = 0; r < ids.size(); ++r)
            std::copy(ev.row_ptr(ids[r]), ev.row_ptr(ids[r]) + ev.cols, out.row_ptr(static_cast<int>(r)));
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, emb, ids = std::move(ids)] {
            const Mat<T>& g = nodes_[id].grad;
            Mat<T>& ge = nodes_[emb].grad;
            for (size_t r = 0; r < ids.size(); ++r) {
                const T* gr = g.row_ptr(static_cast<int>(r));
                T* er = ge.row_ptr(ids[r]);
                for (int j = 0; j < g.cols; ++j) er[j] += gr[j];
            }
        };
        return id;
    }

    Id concat_rows(const std::vector<Id>& xs) {
        int rows = 0;
        const int cols = nodes_[xs[0]].val.cols;
        for (Id x : xs) rows += nodes_[x].val.rows;
        Mat<T> out(rows, cols);
        int r = 0;
        for (Id x : xs) {
            const Mat<T>& v = nodes_[x].val;
            std::copy(v.a.begin(), v.a.end(), out.row_ptr(r));
            r += v.rows;
        }
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, xs] {
            const Mat<T>& g = nodes_[id].grad;
            int r2 = 0;
            for (Id x : xs) {
                Mat<T>& gx = nodes_[x].grad;
                for (int i = 0; i < gx.rows; ++i)
                    for (int j = 0; j < gx.cols; ++j) gx(i, j) += g(r2 + i, j);
                r2 += gx.rows;
            }
        };
        return id;
    }

    Id concat_cols(const std::vector<Id>& xs) {
        const int rows = nodes_[xs[0]].val.rows;
        int cols = 0;
        for (Id x : xs) cols += nodes_[x].val.cols;
        Mat<T> out(rows, cols);
        int c = 0;
        for (Id x : xs) {
            const Mat<T>& v = nodes_[x].val;
            for (int i = 0; i < rows; ++i)
                std::copy(v.row_ptr(i), v.row_ptr(i) + v.cols, out.row_ptr(i) + c);
            c += v.cols;
        }
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, xs] {
            const Mat<T>& g = nodes_[id].grad;
            int c2 = 0;
            for (Id x : xs) {
                Mat<T>& gx = nodes_[x].grad;
                for (int i = 0; i < gx.rows; ++i)
                    for (int j = 0; j < gx.cols; ++j) gx(i, j) += g(i, c2 + j);
                c2 += gx.cols;
            }
        };
        return id;
    }

    Id slice_cols(Id x, int start, int len) {
        const Mat<T>& v = nodes_[x].val;
        Mat<T> out(v.rows, len);
        for (int i = 0; i < v.rows; ++i)
            std::copy(v.row_ptr(i) + start, v.row_ptr(i) + start + len, out.row_ptr(i));
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x, start, len] {
            const Mat<T>& g = nodes_[id].grad;
            Mat<T>& gx = nodes_[x].grad;
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < len; ++j) gx(i, start + j) += g(i, j);
        };
        return id;
    }

    Id slice_rows(Id x, int start, int len) {
        const Mat<T>& v = nodes_[x].val;
        Mat<T> out(len, v.cols);
        for (int i = 0; i < len; ++i)
            std::copy(v.row_ptr(start + i), v.row_ptr(start + i) + v.cols, out.row_ptr(i));
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x, start, len] {
            const Mat<T>& g = nodes_[id].grad;
            Mat<T>& gx = nodes_[x].grad;
            for (int i = 0; i < len; ++i)
                for (int j = 0; j < g.cols; ++j) gx(start + i, j) += g(i, j);
        };
        return id;
    }

    // Mean over rows -> 1 x C.
    Id mean_rows(Id x) {
        const Mat<T>& v = nodes_[x].val;
        Mat<T> out(1, v.cols);
        for (int i = 0; i < v.rows; ++i)
            for (int j = 0; j < v.cols; ++j) out.a[j] += v(i, j);
        const T inv = T(1) / T(v.rows);
        for (auto& o : out.a) o *= inv;
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, x] {
            const Mat<T>& g = nodes_[id].grad;
            Mat<T>& gx = nodes_[x].grad;
            const T inv2 = T(1) / T(gx.rows);
            for (int i = 0; i < gx.rows; ++i)
                for (int j = 0; j < gx.cols; ++j) gx(i, j) += g.a[j] * inv2;
        };
        return id;
    }

    Id add_n(const std::vector<Id>& xs) {
        Mat<T> out = nodes_[xs[0]].val;
        for (size_t k = 1; k < xs.size(); ++k) {
            const Mat<T>& v = nodes_[xs[k]].val;
            for (size_t i = 0; i < out.size(); ++i) out.a[i] += v.a[i];
        }
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, xs] {
            for (Id x : xs) accum(nodes_[x].grad, nodes_[id].grad);
        };
        return id;
    }

    // Weighted sum of per-row cross-entropies against integer targets.
    // Rows with target < 0 are skipped. Returns a 1x1 node; the caller
    // normalizes by its own weight total.
    Id cross_entropy_sum(Id logits, std::vector<int> targets, std::vector<T> weights) {
        const Mat<T>& lv = nodes_[logits].val;
        if (static_cast<int>(targets.size()) != lv.rows ||
            weights.size() != targets.size())
            throw std::invalid_argument("cross_entropy_sum: row count mismatch");
        Mat<T> out(1, 1);
        T loss = T(0);
        for (int i = 0; i < lv.rows; ++i) {
            if (targets[i] < 0) continue;
            const T* li = lv.row_ptr(i);
            T mx = li[0];
            for (int j = 1; j < lv.cols; ++j) mx = li[j] > mx ? li[j] : mx;
            T sum = T(0);
            for (int j = 0; j < lv.cols; ++j) sum += std::exp(li[j] - mx);
            loss += weights[i] * (std::log(sum) + mx - li[targets[i]]);
        }
        out.a[0] = loss;
        Id id = push(std::move(out), nullptr);
        if (grad_) nodes_[id].back = [this, id, logits, targets = std::move(targets),
                                      weights = std::move(weights)] {
            const T dl = nodes_[id].grad.a[0];
            const Mat<T>& lv2 = nodes_[logits].val;
            Mat<T>& gl = nodes_[logits].grad;
            for (int i = 0; i < lv2.rows; ++i) {
                if (targets[i] < 0) continue;
                const T* li = lv2.row_ptr(i);
                T* gi = gl.row_ptr(i);
                T mx = li[0];
                for (int j = 1; j < lv2.cols; ++j) mx = li[j] > mx ? li[j] : mx;
                T sum = T(0);
                for (int j = 0; j < lv2.cols; ++j) sum += std::exp(li[j] - mx);
                const T w = dl * weights[i];
                for (int j = 0; j < lv2.cols; ++j) {
                    T p = std::exp(li[j] - mx) / sum;
                    gi[j] += w * (p - (j == targets[i] ? T(1) : T(0)));
                }
            }
        };
        return id;
    }

    void backward(Id loss) {
        if (!grad_) throw std::logic_error("backward on grad-disabled tape");
        if (nodes_[loss].val.size() != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        nodes_[loss].grad.a[0] = T(1);
        for (Id id = loss; id >= 0; --id)
            if (nodes_[id].back) nodes_[id].back();
    }

    size_t node_count() const { return nodes_.size(); }

    static constexpr T kLnEps = T(1e-5);

private:
    struct Node {
        Mat<T> val;
        Mat<T> grad;
        std::function<void()> back;
    };

    Id push(Mat<T> v, std::nullptr_t) {
        Node n;
        n.val = std::move(v);
        if (grad_) n.grad = Mat<T>(n.val.rows, n.val.cols);
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size()) - 1;
    }

    static void accum(Mat<T>& dst, const Mat<T>& src) {
        for (size_t i = 0; i < src.size(); ++i) dst.a[i] += src.a[i];
    }

    std::vector<Node> nodes_;
    bool grad_;
};

}  // namespace docsimp
