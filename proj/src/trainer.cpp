#include "docsimp/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "docsimp/errors.hpp"

namespace docsimp {

const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::plain: return "plain";
        case TrainMode::guided: return "guided";
        case TrainMode::multitask_prefix: return "multitask_prefix";
        case TrainMode::multitask_sep: return "multitask_sep";
    }
    throw std::logic_error("train_mode_name: bad mode");
}

TrainMode train_mode_from_name(const std::string& s) {
    if (s == "plain") return TrainMode::plain;
    if (s == "guided") return TrainMode::guided;
    if (s == "multitask_prefix") return TrainMode::multitask_prefix;
    if (s == "multitask_sep") return TrainMode::multitask_sep;
    throw ValidationError("unknown training mode '" + s + "'");
}

const char* granularity_name(Granularity g) {
    switch (g) {
        case Granularity::sentence: return "sentence";
        case Granularity::paragraph: return "paragraph";
        case Granularity::document: return "document";
    }
    throw std::logic_error("granularity_name: bad granularity");
}

Granularity granularity_from_name(const std::string& s) {
    if (s == "sentence" || s == "sent") return Granularity::sentence;
    if (s == "paragraph" || s == "para") return Granularity::paragraph;
    if (s == "document" || s == "doc") return Granularity::document;
    throw ValidationError("unknown granularity '" + s + "'");
}

std::vector<std::pair<int, int>> unit_ranges(const Document& doc, Granularity g) {
    const int n = static_cast<int>(doc.sentences.size());
    std::vector<std::pair<int, int>> out;
    if (n == 0) return out;
    switch (g) {
        case Granularity::sentence:
            for (int i = 0; i < n; ++i) out.emplace_back(i, i + 1);
            break;
        case Granularity::paragraph: {
            int start = 0;
            for (int i = 1; i <= n; ++i) {
                if (i == n || doc.paragraph_of(i) != doc.paragraph_of(start)) {
                    out.emplace_back(start, i);
                    start = i;
                }
            }
            break;
        }
        case Granularity::document:
            out.emplace_back(0, n);
            break;
    }
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train config: epochs must be positive");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be positive");
    if (!(lr > 0.0)) throw ValidationError("train config: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ValidationError("train config: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ValidationError("train config: eps must be positive");
    if (patience < 1) throw ValidationError("train config: patience must be positive");
}

namespace {

std::string gold_text(const AlignedPair& pair, int i) {
    std::string out;
    for (int j : pair.alignment[static_cast<size_t>(i)]) {
        if (!out.empty()) out += ' ';
        out += pair.simple_doc.sentences[static_cast<size_t>(j)];
    }
    return out;
}

// Gold simplified vectors for every sentence of the pair: the training-time
// substitute for the store the decoder fills at inference time.
DynamicStore gold_store(const AlignedPair& pair, const ContextEncoder& enc) {
    const int n = static_cast<int>(pair.complex_doc.sentences.size());
    DynamicStore store(n);
    for (int i = 0; i < n; ++i) store.set(i, enc.encode_output(gold_text(pair, i)));
    return store;
}

}  // namespace

std::vector<SeqExample> make_simplifier_examples(const AlignedCorpus& corpus,
                                                 const Tokenizer& tok, TrainMode mode,
                                                 Granularity granularity,
                                                 const ContextEncoder* ctx_enc,
                                                 bool dynamic_context, int max_len) {
    if (ctx_enc != nullptr && granularity != Granularity::sentence)
        throw ValidationError("training examples: context windows require sentence units");
    if (ctx_enc != nullptr && is_multitask(mode))
        throw ValidationError("training examples: context windows apply to plain or "
                              "guided simplifiers only");
    std::vector<SeqExample> out;
    for (const AlignedPair& pair : corpus.pairs) {
        const int level = pair.simple_doc.reading_level;
        DynamicStore store(0);
        if (ctx_enc != nullptr && dynamic_context) store = gold_store(pair, *ctx_enc);
        for (const auto& [a, b] : unit_ranges(pair.complex_doc, granularity)) {
            SeqExample ex;
            std::vector<Op> ops(pair.ops.begin() + a, pair.ops.begin() + b);
            const std::string text = join_sentences(pair.complex_doc.sentences, a, b);
            ex.src = mode == TrainMode::guided ? tok.tokenize_unit(text, level, ops, max_len)
                                               : tok.tokenize(text, level, std::nullopt, max_len);
            ex.tgt.push_back(SpecialTok::kBos);
            if (mode == TrainMode::multitask_prefix)
                for (Op op : ops) ex.tgt.push_back(Tokenizer::op_id(op));
            for (int i = a; i < b; ++i) {
                if (mode == TrainMode::multitask_sep)
                    ex.tgt.push_back(Tokenizer::op_id(ops[static_cast<size_t>(i - a)]));
                for (int id : tok.encode_body(gold_text(pair, i))) ex.tgt.push_back(id);
            }
            ex.tgt.push_back(SpecialTok::kEos);
            if (static_cast<int>(ex.tgt.size()) > max_len)
                throw ValidationError("training target exceeds max_len for doc '" +
                                      pair.complex_doc.doc_id + "'");
            if (ctx_enc != nullptr) {
                const ContextWindow w = ctx_enc->build_window(
                    pair.complex_doc, a, dynamic_context ? &store : nullptr);
                ex.ctx = w.vectors;
            }
            out.push_back(std::move(ex));
        }
    }
    return out;
}

std::vector<PlanExample> make_planner_examples(const AlignedCorpus& corpus,
                                               const Tokenizer& tok, int radius,
                                               bool paragraph_windows, bool dynamic_context) {
    if (radius < 1) throw ValidationError("planner examples: radius must be positive");
    std::vector<PlanExample> out;
    for (const AlignedPair& pair : corpus.pairs) {
        const Document& doc = pair.complex_doc;
        const int n = static_cast<int>(doc.sentences.size());
        for (int i = 0; i < n; ++i) {
            PlanExample ex;
            ex.level = pair.simple_doc.reading_level;
            ex.gold = static_cast<int>(pair.ops[static_cast<size_t>(i)]);
            const int lo = std::max(-radius, -i);
            const int hi = std::min(radius, n - 1 - i);
            const int j = paragraph_windows ? doc.paragraph_start(i) : i;
            for (int off = lo; off <= hi; ++off) {
                const int idx = i + off;
                ContextEncoder::SlotSpec s;
                s.offset = off;
                if (dynamic_context && idx < j) {
                    // Teacher-forced: the gold simplified sentence stands in
                    // for what the pipeline would have generated by now.
                    const std::string gold = gold_text(pair, idx);
                    if (Tokenizer::split_ws(gold).empty())
                        s.sentinel = true;
                    else
                        s.token_ids = tok.encode_body(gold);
                    s.flag = SlotStatus::simplified;
                } else {
                    s.token_ids = tok.encode_body(doc.sentences[static_cast<size_t>(idx)]);
                    s.flag = SlotStatus::complex_src;
                }
                ex.slots.push_back(std::move(s));
            }
            ex.center_row = -lo;  // the offset-0 slot sits -lo rows into the window
            out.push_back(std::move(ex));
        }
    }
    return out;
}

std::vector<double> planner_class_weights(const std::vector<PlanExample>& examples) {
    std::vector<double> counts(kNumOps, 0.0);
    for (const PlanExample& ex : examples) counts[static_cast<size_t>(ex.gold)] += 1.0;
    const double total = static_cast<double>(examples.size());
    std::vector<double> w(kNumOps, 0.0);
    for (int k = 0; k < kNumOps; ++k)
        if (counts[static_cast<size_t>(k)] > 0.0)
            w[static_cast<size_t>(k)] = total / (kNumOps * counts[static_cast<size_t>(k)]);
    return w;
}

void Adam::step(const std::vector<Param<float>*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (Param<float>* p : params) {
        p->ensure_grad();
        if (p->m.rows != p->value.rows || p->m.cols != p->value.cols) {
            p->m = Mat<float>(p->value.rows, p->value.cols);
            p->v = Mat<float>(p->value.rows, p->value.cols);
        }
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double g = static_cast<double>(p->grad.a[i]);
            const double m = b1_ * static_cast<double>(p->m.a[i]) + (1.0 - b1_) * g;
            const double v = b2_ * static_cast<double>(p->v.a[i]) + (1.0 - b2_) * g * g;
            p->m.a[i] = static_cast<float>(m);
            p->v.a[i] = static_cast<float>(v);
            p->value.a[i] = static_cast<float>(
                static_cast<double>(p->value.a[i]) -
                lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_));
        }
    }
}

namespace {

std::vector<Mat<float>> snapshot(const std::vector<Param<float>*>& params) {
    std::vector<Mat<float>> out;
    out.reserve(params.size());
    for (const Param<float>* p : params) out.push_back(p->value);
    return out;
}

void restore(const std::vector<Param<float>*>& params, const std::vector<Mat<float>>& snap) {
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

void zero_grads(const std::vector<Param<float>*>& params) {
    for (Param<float>* p : params) {
        p->ensure_grad();
        p->grad.zero();
    }
}

// Shared epoch/early-stop scaffold. batch_step runs forward+backward over
// the index batch and returns the batch loss; valid_fn scores the held-out
// set; metric_fn (optional) records an auxiliary per-epoch number. The best
// validation epoch's parameters are restored on exit; with no validation set
// the final parameters stand.
template <typename BatchStep, typename ValidFn>
TrainResult run_training(const std::vector<Param<float>*>& params, size_t n_train,
                         bool has_valid, const TrainConfig& cfg, BatchStep&& batch_step,
                         ValidFn&& valid_fn,
                         const std::function<double()>& metric_fn = nullptr) {
    cfg.validate();
    if (n_train == 0) throw ValidationError("training: empty training set");
    Adam adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    Rng shuffle_rng(cfg.seed ^ fnv1a_str("train.shuffle"));
    TrainResult res;
    std::vector<size_t> order(n_train);
    for (size_t i = 0; i < n_train; ++i) order[i] = i;
    std::vector<Mat<float>> best_snap;
    double best_valid = std::numeric_limits<double>::infinity();
    double prev_valid = std::numeric_limits<double>::infinity();
    int consec_rises = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            zero_grads(params);
            const double loss =
                batch_step(std::vector<size_t>(order.begin() + static_cast<long>(start),
                                               order.begin() + static_cast<long>(stop)));
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged: non-finite loss at step " +
                                         std::to_string(adam.steps_taken() + 1));
            adam.step(params);
            epoch_loss += loss;
            ++n_batches;
        }
        res.train_curve.push_back(epoch_loss / n_batches);
        if (!has_valid) {
            res.best_epoch = epoch;
            if (cfg.verbose)
                std::fprintf(stderr, "epoch %d train %.6f\n", epoch, res.train_curve.back());
            continue;
        }
        const double v = valid_fn();
        if (!std::isfinite(v))
            throw std::runtime_error("training diverged: non-finite validation loss after epoch " +
                                     std::to_string(epoch));
        res.valid_curve.push_back(v);
        if (metric_fn) res.metric_curve.push_back(metric_fn());
        if (cfg.verbose)
            std::fprintf(stderr, "epoch %d train %.6f valid %.6f\n", epoch,
                         res.train_curve.back(), v);
        if (v < best_valid) {
            best_valid = v;
            best_snap = snapshot(params);
            res.best_epoch = epoch;
        }
        consec_rises = v > prev_valid ? consec_rises + 1 : 0;
        prev_valid = v;
        if (consec_rises >= cfg.patience) {
            res.stopped_early = true;
            break;
        }
    }
    if (!best_snap.empty()) restore(params, best_snap);
    res.steps = adam.steps_taken();
    return res;
}

const Mat<float>* ctx_ptr(const SeqExample& ex) { return ex.ctx ? &*ex.ctx : nullptr; }

// Builds the batch loss graph: sum of per-example token cross entropies
// normalized by the total number of target tokens in the batch.
double simplifier_batch(Seq2SeqModel& model, const std::vector<SeqExample>& examples,
                        const std::vector<size_t>& idxs, Tape<float>& t, DropCfg drop,
                        Tape<float>::Id* loss_out) {
    std::vector<Tape<float>::Id> losses;
    double total_tokens = 0.0;
    for (size_t idx : idxs) {
        const SeqExample& ex = examples[idx];
        if (ex.tgt.size() < 2) throw ValidationError("training example: target too short");
        const std::vector<int> dec_in(ex.tgt.begin(), ex.tgt.end() - 1);
        const std::vector<int> labels(ex.tgt.begin() + 1, ex.tgt.end());
        const auto logits = model.forward(t, ex.src, dec_in, ctx_ptr(ex), drop);
        losses.push_back(t.cross_entropy_sum(logits, labels,
                                             std::vector<float>(labels.size(), 1.0f)));
        total_tokens += static_cast<double>(labels.size());
    }
    const auto loss = t.mul_const(t.add_n(losses), static_cast<float>(1.0 / total_tokens));
    if (loss_out != nullptr) *loss_out = loss;
    return static_cast<double>(t.val(loss).a[0]);
}

}  // namespace

double simplifier_loss(Seq2SeqModel& model, const std::vector<SeqExample>& examples) {
    if (examples.empty()) throw ValidationError("loss over empty example set");
    Tape<float> t(/*grad_enabled=*/false);
    DropCfg off;
    std::vector<size_t> all(examples.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return simplifier_batch(model, examples, all, t, off, nullptr);
}

TrainResult train_simplifier(Seq2SeqModel& model, const std::vector<SeqExample>& train,
                             const std::vector<SeqExample>& valid, const TrainConfig& cfg) {
    Rng drop_rng(cfg.seed ^ fnv1a_str("train.dropout"));
    const std::vector<Param<float>*>& params = model.params().params();
    auto batch_step = [&](const std::vector<size_t>& idxs) {
        Tape<float> t(/*grad_enabled=*/true);
        DropCfg drop{model.config().dropout, &drop_rng};
        Tape<float>::Id loss = -1;
        const double value = simplifier_batch(model, train, idxs, t, drop, &loss);
        t.backward(loss);
        return value;
    };
    auto valid_fn = [&] { return simplifier_loss(model, valid); };
    return run_training(params, train.size(), !valid.empty(), cfg, batch_step, valid_fn);
}

namespace {

double planner_batch(Planner& planner, const std::vector<PlanExample>& examples,
                     const std::vector<size_t>& idxs, const std::vector<double>& weights,
                     Tape<float>& t, Tape<float>::Id* loss_out) {
    std::vector<Tape<float>::Id> losses;
    double total_weight = 0.0;
    for (size_t idx : idxs) {
        const PlanExample& ex = examples[idx];
        const auto window = planner.context_encoder().window_on_tape(t, ex.slots);
        const auto& center = ex.slots[static_cast<size_t>(ex.center_row)];
        const auto logits =
            planner.logits_on_tape(t, window, center.token_ids, ex.center_row, ex.level);
        const float w = static_cast<float>(weights[static_cast<size_t>(ex.gold)]);
        losses.push_back(t.cross_entropy_sum(logits, {ex.gold}, {w}));
        total_weight += static_cast<double>(w);
    }
    if (!(total_weight > 0.0)) throw std::logic_error("planner batch: zero total weight");
    const auto loss = t.mul_const(t.add_n(losses), static_cast<float>(1.0 / total_weight));
    if (loss_out != nullptr) *loss_out = loss;
    return static_cast<double>(t.val(loss).a[0]);
}

}  // namespace

double planner_loss(Planner& planner, const std::vector<PlanExample>& examples,
                    const std::vector<double>& class_weights) {
    if (examples.empty()) throw ValidationError("loss over empty example set");
    Tape<float> t(/*grad_enabled=*/false);
    std::vector<size_t> all(examples.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return planner_batch(planner, examples, all, class_weights, t, nullptr);
}

double planner_accuracy(Planner& planner, const std::vector<PlanExample>& examples) {
    if (examples.empty()) throw ValidationError("accuracy over empty example set");
    int hits = 0;
    for (const PlanExample& ex : examples) {
        Tape<float> t(/*grad_enabled=*/false);
        const auto window = planner.context_encoder().window_on_tape(t, ex.slots);
        const auto& center = ex.slots[static_cast<size_t>(ex.center_row)];
        const auto logits =
            planner.logits_on_tape(t, window, center.token_ids, ex.center_row, ex.level);
        const Mat<float>& lv = t.val(logits);
        int best = 0;
        for (int k = 1; k < kNumOps; ++k)
            if (lv.a[static_cast<size_t>(k)] > lv.a[static_cast<size_t>(best)]) best = k;
        if (best == ex.gold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

std::array<double, 4> planner_class_accuracy(Planner& planner,
                                             const std::vector<PlanExample>& examples) {
    if (examples.empty()) throw ValidationError("accuracy over empty example set");
    std::array<double, 4> hits{}, counts{};
    for (const PlanExample& ex : examples) {
        Tape<float> t(/*grad_enabled=*/false);
        const auto window = planner.context_encoder().window_on_tape(t, ex.slots);
        const auto& center = ex.slots[static_cast<size_t>(ex.center_row)];
        const auto logits =
            planner.logits_on_tape(t, window, center.token_ids, ex.center_row, ex.level);
        const Mat<float>& lv = t.val(logits);
        int best = 0;
        for (int k = 1; k < kNumOps; ++k)
            if (lv.a[static_cast<size_t>(k)] > lv.a[static_cast<size_t>(best)]) best = k;
        counts[static_cast<size_t>(ex.gold)] += 1.0;
        if (best == ex.gold) hits[static_cast<size_t>(ex.gold)] += 1.0;
    }
    std::array<double, 4> acc{};
    for (size_t k = 0; k < 4; ++k)
        acc[k] = counts[k] > 0.0 ? hits[k] / counts[k] : std::nan("");
    return acc;
}

TrainResult train_planner(Planner& planner, const std::vector<PlanExample>& train,
                          const std::vector<PlanExample>& valid, const TrainConfig& cfg) {
    const std::vector<double> weights = planner_class_weights(train);
    const std::vector<Param<float>*> params = planner.all_params();
    auto batch_step = [&](const std::vector<size_t>& idxs) {
        Tape<float> t(/*grad_enabled=*/true);
        Tape<float>::Id loss = -1;
        const double value = planner_batch(planner, train, idxs, weights, t, &loss);
        t.backward(loss);
        return value;
    };
    auto valid_fn = [&] { return planner_loss(planner, valid, weights); };
    const std::function<double()> metric_fn = [&] { return planner_accuracy(planner, valid); };
    return run_training(params, train.size(), !valid.empty(), cfg, batch_step, valid_fn,
                        valid.empty() ? nullptr : metric_fn);
}

}  // namespace docsimp
