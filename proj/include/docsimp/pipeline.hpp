#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "docsimp/context.hpp"
#include "docsimp/corpus.hpp"
#include "docsimp/planner.hpp"
#include "docsimp/seq2seq.hpp"
#include "docsimp/tokenizer.hpp"
#include "docsimp/trainer.hpp"

namespace docsimp {

// Where the per-sentence operations come from at inference time. `oracle`
// covers gold labels and plans read from a file alike; `predicted` asks the
// planner unit by unit as generation proceeds.
enum class PlanSource { none, predicted, oracle };

const char* plan_source_name(PlanSource s);
PlanSource plan_source_from_name(const std::string& s);

struct Strategy {
    TrainMode mode = TrainMode::plain;  // input layout the simplifier was trained with
    Granularity granularity = Granularity::sentence;
    PlanSource plan = PlanSource::none;
    bool use_context = false;  // simplifier consumes context windows
    bool dynamic = true;       // windows read prior outputs; false reads the complex doc only
    int beam_size = 1;
    int max_len = 1024;  // generation cap per unit
    int batch_size = 8;  // documents advanced per step in the batched driver
};

// Outputs of one source unit, for provenance-preserving evaluation and
// plan-compliance checks. Units cover [begin, begin + count) of the complex
// document and partition it.
struct UnitRecord {
    int begin = 0;
    int count = 1;
    std::optional<Op> op;  // the operation applied, for planned sentence units
    std::vector<std::string> outputs;
};

struct SimplifiedDoc {
    std::string doc_id;
    int level = 0;
    std::vector<std::string> sentences;
    std::vector<UnitRecord> records;  // one per unit, in document order
    std::vector<Op> plan_used;        // empty when no plan was involved
    double ms_total = 0.0;            // in-process wall time; never serialized

    std::string text() const { return join_sentences(sentences); }
};

// Runs a simplifier (with optional context windows and optional planner)
// over whole documents. Each document keeps one dynamic store per context
// encoder, filled left to right as units complete; the batched driver
// advances many documents in lockstep, one unit per document per step, which
// matches the sequential driver exactly because stores never cross documents.
class Pipeline {
public:
    Pipeline(Seq2SeqModel& model, ContextEncoder* ctx_enc, Planner* planner,
             const Tokenizer& tok, const Strategy& strat);

    const Strategy& strategy() const { return strat_; }

    // Test hook: called with (document, center sentence index, window) for
    // every context window the run builds, simplifier and planner alike.
    using WindowObserver = std::function<void(const Document&, int, const ContextWindow&)>;
    void set_window_observer(WindowObserver obs) { observer_ = std::move(obs); }

    // Sequential reference driver. plan must be non-null iff the strategy
    // says PlanSource::oracle; its length must match the sentence count.
    SimplifiedDoc run_document(const Document& doc, int target_level, const Plan* plan);

    // Batched driver over many documents (plans parallel to docs when
    // given). batched=false degrades to per-document sequential runs, which
    // is the comparison arm of the equivalence tests.
    std::vector<SimplifiedDoc> run_documents(const std::vector<Document>& docs,
                                             const std::vector<int>& target_levels,
                                             const std::vector<Plan>* plans, bool batched);

private:
    struct DocState {
        const Document* doc = nullptr;
        const Plan* plan = nullptr;
        int target_level = 0;
        size_t next_unit = 0;
        std::vector<std::pair<int, int>> units;
        std::optional<DynamicStore> sim_store;
        std::optional<DynamicStore> plan_store;
        SimplifiedDoc out;
    };

    void validate_strategy() const;
    DocState make_state(const Document& doc, int target_level, const Plan* plan) const;
    ContextWindow plan_window(DocState& st, int i) const;
    void process_unit(DocState& st);

    Seq2SeqModel* model_;
    ContextEncoder* ctx_enc_;
    Planner* planner_;
    const Tokenizer* tok_;
    Strategy strat_;
    WindowObserver observer_;
};

// Fraction of planned sentence units whose outputs obey the operation: copy
// keeps the sentence (modulo whitespace), delete emits nothing, split emits
// at least two sentences, rephrase emits at least one.
struct ComplianceStats {
    int checked = 0;
    int satisfied = 0;

    double rate() const { return checked == 0 ? 1.0 : static_cast<double>(satisfied) / checked; }
};

ComplianceStats plan_compliance(const Document& doc, const SimplifiedDoc& out);

// JSONL persistence for simplified documents (timing excluded, so reruns of
// the same command are byte-identical). Each record carries doc_id, level,
// plan, output sentences, and per-unit provenance with [begin, end) source
// ranges.
void save_simplified(const std::vector<SimplifiedDoc>& docs, const std::string& path);
std::vector<SimplifiedDoc> load_simplified(const std::string& path);

}  // namespace docsimp
