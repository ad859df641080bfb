#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "docsimp/context.hpp"
#include "docsimp/corpus.hpp"
#include "docsimp/planner.hpp"
#include "docsimp/seq2seq.hpp"
#include "docsimp/tokenizer.hpp"

namespace docsimp {

// How a simplifier consumes one source unit (a sentence, paragraph, or whole
// document, depending on granularity).
//   plain:            [RL] BOS unit EOS -> BOS outputs EOS
//   guided:           [OP...] [RL] BOS unit EOS -> BOS outputs EOS
//                     (one op token per source sentence, as a prefix block)
//   multitask_prefix: [RL] BOS unit EOS -> BOS [OP...] outputs EOS
//   multitask_sep:    [RL] BOS unit EOS -> BOS ([OP_i] outputs_i)... EOS
// Deleted sentences keep their (empty-bodied) target contribution so every
// mode sees the full operation distribution.
enum class TrainMode { plain, guided, multitask_prefix, multitask_sep };

const char* train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& s);
inline bool is_multitask(TrainMode m) {
    return m == TrainMode::multitask_prefix || m == TrainMode::multitask_sep;
}

// Unit size for training pairs and inference drivers. Paragraph units follow
// the document's paragraph index.
enum class Granularity { sentence, paragraph, document };

const char* granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& s);

// Contiguous [begin, end) sentence ranges covering the document: one per
// sentence, one per paragraph, or a single whole-document range.
std::vector<std::pair<int, int>> unit_ranges(const Document& doc, Granularity g);

struct SeqExample {
    std::vector<int> src;
    std::vector<int> tgt;  // BOS body EOS; decoder input tgt[:-1], labels tgt[1:]
    std::optional<Mat<float>> ctx;  // context window for context-attention models
};

// One example per unit of each aligned pair. When ctx_enc is non-null
// (sentence granularity only) each example gets a context window; with
// dynamic_context the left slots hold the encoder's vectors of the gold
// simplified sentences (the training-time stand-in for the model's own prior
// outputs), otherwise every slot reads the complex document.
std::vector<SeqExample> make_simplifier_examples(const AlignedCorpus& corpus,
                                                 const Tokenizer& tok, TrainMode mode,
                                                 Granularity granularity,
                                                 const ContextEncoder* ctx_enc,
                                                 bool dynamic_context, int max_len);

struct PlanExample {
    std::vector<ContextEncoder::SlotSpec> slots;
    int center_row = 0;
    int level = 0;
    int gold = 0;  // Op value
};

// Teacher-forced planner examples, one per sentence. With dynamic_context,
// slots left of the window rule's boundary hold gold simplified sentences
// (flagged simplified); otherwise every slot reads the complex document.
// paragraph_windows moves the boundary from the center sentence to its
// paragraph start, matching pipelines whose store updates per paragraph.
std::vector<PlanExample> make_planner_examples(const AlignedCorpus& corpus,
                                               const Tokenizer& tok, int radius,
                                               bool paragraph_windows, bool dynamic_context);

// Inverse-frequency class weights over gold labels: N / (#classes * N_k),
// zero for absent classes.
std::vector<double> planner_class_weights(const std::vector<PlanExample>& examples);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int patience = 3;  // consecutive validation-loss rises before stopping
    uint64_t seed = 13;
    bool verbose = false;

    void validate() const;
};

struct TrainResult {
    std::vector<double> train_curve;  // per-epoch mean of batch losses
    std::vector<double> valid_curve;
    std::vector<double> metric_curve;  // per-epoch auxiliary metric, when one applies
    int best_epoch = -1;  // epoch whose parameters the model ends up with
    bool stopped_early = false;
    int64_t steps = 0;
};

class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(const std::vector<Param<float>*>& params);
    int64_t steps_taken() const { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
};

// Token-mean cross entropy of the model over examples, dropout off.
double simplifier_loss(Seq2SeqModel& model, const std::vector<SeqExample>& examples);

// Teacher-forced training with Adam, epoch shuffling from a seed-derived
// stream, and early stopping on the validation loss (the best epoch's
// parameters are restored at the end). A non-finite loss aborts with an
// error naming the step.
TrainResult train_simplifier(Seq2SeqModel& model, const std::vector<SeqExample>& train,
                             const std::vector<SeqExample>& valid, const TrainConfig& cfg);

double planner_loss(Planner& planner, const std::vector<PlanExample>& examples,
                    const std::vector<double>& class_weights);

double planner_accuracy(Planner& planner, const std::vector<PlanExample>& examples);

// Per-class accuracy indexed by Op value; NaN for classes absent from
// examples.
std::array<double, 4> planner_class_accuracy(Planner& planner,
                                             const std::vector<PlanExample>& examples);

TrainResult train_planner(Planner& planner, const std::vector<PlanExample>& train,
                          const std::vector<PlanExample>& valid, const TrainConfig& cfg);

}  // namespace docsimp
