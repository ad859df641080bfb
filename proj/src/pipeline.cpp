#include "docsimp/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <stdexcept>

#include "docsimp/errors.hpp"
#include "docsimp/segment.hpp"
#include "json.hpp"

namespace docsimp {

const char* plan_source_name(PlanSource s) {
    switch (s) {
        case PlanSource::none: return "none";
        case PlanSource::predicted: return "predicted";
        case PlanSource::oracle: return "oracle";
    }
    throw std::logic_error("plan_source_name: bad source");
}

PlanSource plan_source_from_name(const std::string& s) {
    if (s == "none") return PlanSource::none;
    if (s == "predicted") return PlanSource::predicted;
    if (s == "oracle") return PlanSource::oracle;
    throw ValidationError("unknown plan source '" + s + "'");
}

Pipeline::Pipeline(Seq2SeqModel& model, ContextEncoder* ctx_enc, Planner* planner,
                   const Tokenizer& tok, const Strategy& strat)
    : model_(&model), ctx_enc_(ctx_enc), planner_(planner), tok_(&tok), strat_(strat) {
    validate_strategy();
}

void Pipeline::validate_strategy() const {
    if (strat_.beam_size < 1) throw ValidationError("strategy: beam_size must be positive");
    if (strat_.batch_size < 1) throw ValidationError("strategy: batch_size must be positive");
    if (strat_.mode == TrainMode::guided && strat_.plan == PlanSource::none)
        throw ValidationError("strategy: a guided simplifier needs a plan source");
    if (strat_.mode != TrainMode::guided && strat_.plan != PlanSource::none)
        throw ValidationError("strategy: plans only apply to a guided simplifier");
    if (strat_.plan == PlanSource::predicted && planner_ == nullptr)
        throw ValidationError("strategy: predicted plans need a planner");
    if (strat_.plan != PlanSource::predicted && planner_ != nullptr)
        throw ValidationError("strategy: planner given but plan source is not 'predicted'");
    if (strat_.use_context != (ctx_enc_ != nullptr))
        throw ValidationError("strategy: context encoder presence disagrees with use_context");
    if (strat_.use_context != model_->config().context_attention)
        throw ValidationError("strategy: use_context disagrees with the model architecture");
    if (strat_.use_context && strat_.granularity != Granularity::sentence)
        throw ValidationError("strategy: context windows require sentence granularity");
    if (is_multitask(strat_.mode) && strat_.use_context)
        throw ValidationError("strategy: multitask modes plan for themselves; "
                              "context windows do not apply");
    if (strat_.use_context && ctx_enc_ != nullptr &&
        ctx_enc_->config().d_ctx != model_->config().d_ctx)
        throw ValidationError("strategy: context width disagrees with the model");
}

Pipeline::DocState Pipeline::make_state(const Document& doc, int target_level,
                                        const Plan* plan) const {
    if (strat_.plan == PlanSource::oracle) {
        if (plan == nullptr) throw ValidationError("pipeline: plan missing for oracle-plan run");
        if (plan->doc_id != doc.doc_id)
            throw ValidationError("pipeline: plan doc_id '" + plan->doc_id +
                                  "' does not match document '" + doc.doc_id + "'");
        if (plan->ops.size() != doc.sentences.size())
            throw ValidationError("pipeline: plan length does not match sentence count for '" +
                                  doc.doc_id + "'");
    } else if (plan != nullptr) {
        throw ValidationError("pipeline: plan supplied but the strategy does not take one");
    }
    DocState st;
    st.doc = &doc;
    st.plan = plan;
    st.target_level = target_level;
    st.units = unit_ranges(doc, strat_.granularity);
    const int n = static_cast<int>(doc.sentences.size());
    if (strat_.use_context && strat_.dynamic) st.sim_store.emplace(n);
    if (strat_.plan == PlanSource::predicted && strat_.dynamic) st.plan_store.emplace(n);
    st.out.doc_id = doc.doc_id;
    st.out.level = target_level;
    return st;
}

ContextWindow Pipeline::plan_window(DocState& st, int i) const {
    ContextEncoder& enc = planner_->context_encoder();
    const DynamicStore* store = st.plan_store ? &*st.plan_store : nullptr;
    ContextWindow w = strat_.granularity == Granularity::paragraph
                          ? enc.build_window_paragraph(*st.doc, i, store)
                          : enc.build_window(*st.doc, i, store);
    if (observer_) observer_(*st.doc, i, w);
    return w;
}

void Pipeline::process_unit(DocState& st) {
    const auto t0 = std::chrono::steady_clock::now();
    const Document& doc = *st.doc;
    const auto [a, b] = st.units[st.next_unit];
    GenConfig gen;
    gen.beam_size = strat_.beam_size;
    gen.max_len = strat_.max_len;
    const std::string text = join_sentences(doc.sentences, a, b);

    UnitRecord rec;
    rec.begin = a;
    rec.count = b - a;

    if (is_multitask(strat_.mode)) {
        const std::vector<int> src =
            tok_->tokenize(text, st.target_level, std::nullopt, model_->config().max_len);
        const GenResult r = generate(*model_, src, static_cast<const Mat<float>*>(nullptr), gen);
        std::vector<int> text_ids;
        std::vector<Op> unit_ops;
        text_ids.reserve(r.ids.size());
        for (int id : r.ids) {
            if (Tokenizer::is_op_id(id))
                unit_ops.push_back(Tokenizer::op_from_id(id));
            else
                text_ids.push_back(id);
        }
        for (Op op : unit_ops) st.out.plan_used.push_back(op);
        if (rec.count == 1 && unit_ops.size() == 1) rec.op = unit_ops.front();
        rec.outputs = resegment(tok_->detokenize(text_ids));
    } else {
        std::vector<Op> ops;
        if (strat_.plan == PlanSource::oracle) {
            ops.assign(st.plan->ops.begin() + a, st.plan->ops.begin() + b);
        } else if (strat_.plan == PlanSource::predicted) {
            for (int i = a; i < b; ++i)
                ops.push_back(planner_
                                  ->predict(doc.sentences[static_cast<size_t>(i)],
                                            plan_window(st, i), st.target_level)
                                  .op);
        }
        for (Op op : ops) st.out.plan_used.push_back(op);
        if (strat_.granularity == Granularity::sentence && !ops.empty()) rec.op = ops.front();

        // A planned delete at sentence granularity never reaches the model:
        // the unit contributes no output and its store slots go to the
        // sentinel, exactly as an empty generation would.
        const bool skip = strat_.granularity == Granularity::sentence && !ops.empty() &&
                          ops.front() == Op::del;
        if (!skip) {
            const std::vector<int> src =
                strat_.mode == TrainMode::guided
                    ? tok_->tokenize_unit(text, st.target_level, ops, model_->config().max_len)
                    : tok_->tokenize(text, st.target_level, std::nullopt,
                                     model_->config().max_len);
            Mat<float> win;
            const Mat<float>* ctx = nullptr;
            if (strat_.use_context) {
                const DynamicStore* store = st.sim_store ? &*st.sim_store : nullptr;
                const ContextWindow w = ctx_enc_->build_window(doc, a, store);
                if (observer_) observer_(doc, a, w);
                win = w.vectors;
                ctx = &win;
            }
            const GenResult r = generate(*model_, src, ctx, gen);
            rec.outputs = resegment(tok_->detokenize(r.ids));
        }
        const std::string out_text = join_sentences(rec.outputs);
        for (int i = a; i < b; ++i) {
            if (st.sim_store) st.sim_store->set(i, ctx_enc_->encode_output(out_text));
            if (st.plan_store)
                st.plan_store->set(i, planner_->context_encoder().encode_output(out_text));
        }
    }

    for (const std::string& s : rec.outputs) st.out.sentences.push_back(s);
    st.out.records.push_back(std::move(rec));
    ++st.next_unit;
    st.out.ms_total +=
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
}

SimplifiedDoc Pipeline::run_document(const Document& doc, int target_level, const Plan* plan) {
    DocState st = make_state(doc, target_level, plan);
    while (st.next_unit < st.units.size()) process_unit(st);
    return std::move(st.out);
}

std::vector<SimplifiedDoc> Pipeline::run_documents(const std::vector<Document>& docs,
                                                   const std::vector<int>& target_levels,
                                                   const std::vector<Plan>* plans,
                                                   bool batched) {
    if (docs.size() != target_levels.size())
        throw ValidationError("pipeline: document/level count mismatch");
    if (plans != nullptr && plans->size() != docs.size())
        throw ValidationError("pipeline: document/plan count mismatch");
    std::vector<SimplifiedDoc> out;
    out.reserve(docs.size());
    if (!batched) {
        for (size_t d = 0; d < docs.size(); ++d)
            out.push_back(run_document(docs[d], target_levels[d],
                                       plans != nullptr ? &(*plans)[d] : nullptr));
        return out;
    }
    std::vector<DocState> states;
    states.reserve(docs.size());
    for (size_t d = 0; d < docs.size(); ++d)
        states.push_back(make_state(docs[d], target_levels[d],
                                    plans != nullptr ? &(*plans)[d] : nullptr));
    std::vector<size_t> active;
    for (size_t d = 0; d < states.size(); ++d)
        if (states[d].next_unit < states[d].units.size()) active.push_back(d);
    while (!active.empty()) {
        // One step: the next unit of every active document, in chunks of at
        // most batch_size documents. A chunk must never hold two units of
        // the same document; that would let a step see its own outputs.
        for (size_t start = 0; start < active.size();
             start += static_cast<size_t>(strat_.batch_size)) {
            const size_t stop =
                std::min(active.size(), start + static_cast<size_t>(strat_.batch_size));
            std::set<std::string> seen;
            for (size_t k = start; k < stop; ++k)
                if (!seen.insert(states[active[k]].doc->doc_id).second)
                    throw std::logic_error("pipeline: two units of one document in a batch");
            for (size_t k = start; k < stop; ++k) process_unit(states[active[k]]);
        }
        std::vector<size_t> still;
        for (size_t d : active)
            if (states[d].next_unit < states[d].units.size()) still.push_back(d);
        active = std::move(still);
    }
    for (DocState& st : states) out.push_back(std::move(st.out));
    return out;
}

ComplianceStats plan_compliance(const Document& doc, const SimplifiedDoc& out) {
    ComplianceStats stats;
    for (const UnitRecord& rec : out.records) {
        if (!rec.op || rec.count != 1) continue;
        ++stats.checked;
        const std::vector<std::string>& outs = rec.outputs;
        bool ok = false;
        switch (*rec.op) {
            case Op::copy:
                ok = !outs.empty() &&
                     Tokenizer::normalize_ws(join_sentences(outs)) ==
                         Tokenizer::normalize_ws(doc.sentences[static_cast<size_t>(rec.begin)]);
                break;
            case Op::rephrase:
                ok = !outs.empty();
                break;
            case Op::split:
                ok = outs.size() >= 2;
                break;
            case Op::del:
                ok = outs.empty();
                break;
        }
        if (ok) ++stats.satisfied;
    }
    return stats;
}

void save_simplified(const std::vector<SimplifiedDoc>& docs, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open '" + path + "' for writing");
    for (const SimplifiedDoc& d : docs) {
        nlohmann::json j;
        j["doc_id"] = d.doc_id;
        j["level"] = d.level;
        std::vector<std::string> plan;
        plan.reserve(d.plan_used.size());
        for (Op op : d.plan_used) plan.push_back(op_name(op));
        j["plan"] = plan;
        j["output"] = d.sentences;
        nlohmann::json prov = nlohmann::json::array();
        for (const UnitRecord& rec : d.records) {
            nlohmann::json u;
            u["src"] = {rec.begin, rec.begin + rec.count};
            u["op"] = rec.op ? nlohmann::json(op_name(*rec.op)) : nlohmann::json(nullptr);
            u["outputs"] = rec.outputs;
            prov.push_back(std::move(u));
        }
        j["provenance"] = std::move(prov);
        os << j.dump() << '\n';
    }
    if (!os) throw ValidationError("write to '" + path + "' failed");
}

std::vector<SimplifiedDoc> load_simplified(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open '" + path + "'");
    std::vector<SimplifiedDoc> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": bad JSON: " +
                                  e.what());
        }
        try {
            SimplifiedDoc d;
            d.doc_id = j.at("doc_id").get<std::string>();
            d.level = j.at("level").get<int>();
            for (const auto& s : j.at("plan"))
                d.plan_used.push_back(op_from_name(s.get<std::string>()));
            for (const auto& s : j.at("output")) d.sentences.push_back(s.get<std::string>());
            for (const auto& u : j.at("provenance")) {
                UnitRecord rec;
                rec.begin = u.at("src").at(0).get<int>();
                rec.count = u.at("src").at(1).get<int>() - rec.begin;
                if (!u.at("op").is_null()) rec.op = op_from_name(u.at("op").get<std::string>());
                for (const auto& s : u.at("outputs")) rec.outputs.push_back(s.get<std::string>());
                d.records.push_back(std::move(rec));
            }
            out.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": bad record: " + e.what());
        }
    }
    return out;
}

}  // namespace docsimp
