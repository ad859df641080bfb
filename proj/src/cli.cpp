#include "docsimp/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "docsimp/checkpoint.hpp"
#include "docsimp/corpus.hpp"
#include "docsimp/errors.hpp"
#include "docsimp/metrics.hpp"
#include "docsimp/pipeline.hpp"
#include "docsimp/planner.hpp"
#include "docsimp/rng.hpp"
#include "docsimp/seq2seq.hpp"
#include "docsimp/tokenizer.hpp"
#include "docsimp/trainer.hpp"
#include "json.hpp"

namespace docsimp {

namespace {

namespace fs = std::filesystem;

std::string read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string checksum_hex(const std::string& bytes) {
    const uint64_t h = fnv1a(bytes.data(), bytes.size(), 0xcbf29ce484222325ull);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Manifest beside the outputs: enough to re-execute the command and check
// the results byte for byte.
void write_manifest(const std::string& manifest_path, const std::string& command,
                    const std::vector<std::string>& args, uint64_t seed,
                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["args"] = args;
    j["seed"] = seed;
    std::map<std::string, std::string> sums;
    for (const std::string& p : outputs) sums[p] = checksum_hex(read_file_bytes(p));
    j["outputs"] = sums;
    std::ofstream os(manifest_path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open '" + manifest_path + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw ValidationError("write to '" + manifest_path + "' failed");
}

Tokenizer load_data_tokenizer(const std::string& data_dir) {
    return Tokenizer::load_vocab((fs::path(data_dir) / "vocab.txt").string());
}

bool parse_on_off(const std::string& s, const char* what) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw UsageError(std::string(what) + " must be 'on' or 'off'");
}

Granularity parse_granularity(const std::string& s, const char* what) {
    try {
        return granularity_from_name(s);
    } catch (const ValidationError&) {
        throw UsageError(std::string(what) + " must be 'sent', 'para' or 'doc'");
    }
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad " + what + " entry '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError(what + " must not be empty");
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad " + what + " entry '" + item + "'");
        }
    }
    return out;
}

void report_violations(const ValidationReport& report) {
    if (report.empty()) return;
    std::string msg = "corpus validation failed: ";
    msg += report.front().doc_id + " [" + report.front().rule + "] " + report.front().message;
    if (report.size() > 1)
        msg += " (and " + std::to_string(report.size() - 1) + " more)";
    throw ValidationError(msg);
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string out_dir;
    int train_docs = 100;
    int valid_docs = 20;
    int test_docs = 20;
    int min_sentences = 3;
    int max_sentences = 8;
    std::string levels = "2,3,4";
    std::string op_dist = "0.4,0.3,0.2,0.1";
    double level_skew = 0.4;
    double adj_prob = 0.35;
    double adv_prob = 0.2;
    bool cue_rule = false;
    uint64_t seed = 13;
};

void cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
    fs::create_directories(a.out_dir);
    const std::vector<double> dist = parse_double_list(a.op_dist, "--op-dist");
    if (dist.size() != 4) throw UsageError("--op-dist needs exactly four weights");
    GenSpec base;
    base.min_sentences = a.min_sentences;
    base.max_sentences = a.max_sentences;
    base.op_distribution = {{Op::copy, dist[0]},
                            {Op::rephrase, dist[1]},
                            {Op::split, dist[2]},
                            {Op::del, dist[3]}};
    base.target_levels = parse_int_list(a.levels, "--levels");
    base.level_skew = a.level_skew;
    base.adj_prob = a.adj_prob;
    base.adv_prob = a.adv_prob;
    base.cue_rule = a.cue_rule;
    base.seed = a.seed;

    struct SplitSpec {
        const char* tag;
        int docs;
        int start;
    };
    const SplitSpec splits[] = {
        {"train", a.train_docs, 0},
        {"valid", a.valid_docs, a.train_docs},
        {"test", a.test_docs, a.train_docs + a.valid_docs},
    };
    std::vector<AlignedCorpus> corpora;
    for (const SplitSpec& s : splits) {
        GenSpec spec = base;
        spec.num_docs = s.docs;
        spec.article_start = s.start;
        spec.split_tag = s.tag;
        corpora.push_back(generate_synthetic(spec));
    }
    std::vector<const AlignedCorpus*> ptrs;
    for (const AlignedCorpus& c : corpora) ptrs.push_back(&c);
    report_violations(validate_corpora(ptrs));

    const Tokenizer tok = Tokenizer::from_words(generator_vocabulary());
    const std::string vocab_path = (fs::path(a.out_dir) / "vocab.txt").string();
    tok.save_vocab(vocab_path);
    std::vector<std::string> outputs{vocab_path};
    for (const AlignedCorpus& c : corpora) {
        const std::string path = (fs::path(a.out_dir) / (c.split_tag + ".jsonl")).string();
        save_corpus(c, path);
        outputs.push_back(path);
        std::printf("wrote %s (%zu pairs)\n", path.c_str(), c.pairs.size());
    }
    write_manifest((fs::path(a.out_dir) / "manifest.json").string(), "generate-data", argv,
                   a.seed, outputs);
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string data_dir;
    std::string out;
    std::string kind = "simplifier";
    std::string mode = "plain";
    std::string granularity = "sent";
    std::string dynamic = "on";
    bool context = false;
    bool ctx_shared_norm = false;
    int radius = 13;
    int d_model = 64;
    int n_heads = 4;
    int enc_layers = 2;
    int dec_layers = 2;
    int ffn_dim = 128;
    int max_len = 1024;
    double dropout = 0.1;
    std::string attention = "full";
    int window = 32;
    int global_tokens = 3;
    int d_ctx = 64;
    int d_hidden = 64;
    int d_rl = 8;
    int epochs = 30;
    int batch_size = 16;
    double lr = 2e-4;
    int patience = 3;
    uint64_t seed = 13;
    bool verbose = false;
};

TrainConfig train_config_of(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.lr = a.lr;
    cfg.patience = a.patience;
    cfg.seed = a.seed;
    cfg.verbose = a.verbose;
    return cfg;
}

void print_train_result(const TrainResult& res, int64_t params) {
    std::printf("epochs_run %zu best_epoch %d steps %lld params %lld%s\n",
                res.train_curve.size(), res.best_epoch,
                static_cast<long long>(res.steps), static_cast<long long>(params),
                res.stopped_early ? " (early stop)" : "");
    if (!res.train_curve.empty())
        std::printf("final_train_loss %.6f\n", res.train_curve.back());
    if (!res.valid_curve.empty())
        std::printf("best_valid_loss %.6f\n",
                    res.valid_curve[static_cast<size_t>(res.best_epoch)]);
}

std::string write_train_log(const std::string& checkpoint_path, const TrainResult& res) {
    const std::string path = checkpoint_path + ".train_log.csv";
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open '" + path + "' for writing");
    os << "epoch,train_loss,valid_loss,metric\n";
    for (size_t e = 0; e < res.train_curve.size(); ++e) {
        char line[128];
        std::snprintf(line, sizeof line, "%zu,%.6f", e, res.train_curve[e]);
        os << line;
        if (e < res.valid_curve.size()) {
            std::snprintf(line, sizeof line, ",%.6f", res.valid_curve[e]);
            os << line;
        } else {
            os << ',';
        }
        if (e < res.metric_curve.size()) {
            std::snprintf(line, sizeof line, ",%.6f", res.metric_curve[e]);
            os << line;
        } else {
            os << ',';
        }
        os << '\n';
    }
    if (!os) throw ValidationError("write to '" + path + "' failed");
    return path;
}

void cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
    const Tokenizer tok = load_data_tokenizer(a.data_dir);
    const AlignedCorpus train =
        load_corpus((fs::path(a.data_dir) / "train.jsonl").string(), "train");
    const AlignedCorpus valid =
        load_corpus((fs::path(a.data_dir) / "valid.jsonl").string(), "valid");
    report_violations(validate_corpora({&train, &valid}));
    const Granularity gran = parse_granularity(a.granularity, "--granularity");
    const bool dynamic = parse_on_off(a.dynamic, "--dynamic");

    TrainResult res;
    if (a.kind == "simplifier") {
        TrainMode mode = TrainMode::plain;
        try {
            mode = train_mode_from_name(a.mode);
        } catch (const ValidationError&) {
            throw UsageError(
                "--mode must be 'plain', 'guided', 'multitask_prefix' or 'multitask_sep'");
        }
        if (a.context && gran != Granularity::sentence)
            throw UsageError("--context requires sentence granularity");
        ModelConfig cfg;
        cfg.d_model = a.d_model;
        cfg.n_heads = a.n_heads;
        cfg.n_enc_layers = a.enc_layers;
        cfg.n_dec_layers = a.dec_layers;
        cfg.ffn_dim = a.ffn_dim;
        cfg.max_len = a.max_len;
        cfg.dropout = a.dropout;
        cfg.context_attention = a.context;
        cfg.ctx_dedicated_norm = !a.ctx_shared_norm;
        if (a.attention != "full" && a.attention != "sliding")
            throw UsageError("--attention must be 'full' or 'sliding'");
        cfg.attention_mode =
            a.attention == "sliding" ? AttentionMode::sliding : AttentionMode::full;
        cfg.sliding_window = a.window;
        cfg.global_tokens = a.global_tokens;
        cfg.d_ctx = a.d_ctx;
        cfg.vocab_size = tok.vocab_size();
        cfg.vocab_hash = tok.vocab_hash();
        cfg.seed = a.seed;
        Seq2SeqModel model(cfg);

        std::unique_ptr<ContextEncoder> ctx;
        if (a.context) {
            ContextEncoderConfig ec;
            ec.d_ctx = a.d_ctx;
            ec.radius = a.radius;
            ec.seed = a.seed;
            ctx = std::make_unique<ContextEncoder>(ec, tok);
        }
        const auto train_ex = make_simplifier_examples(train, tok, mode, gran, ctx.get(),
                                                       dynamic, cfg.max_len);
        const auto valid_ex = make_simplifier_examples(valid, tok, mode, gran, ctx.get(),
                                                       dynamic, cfg.max_len);
        res = train_simplifier(model, train_ex, valid_ex, train_config_of(a));
        save_simplifier(a.out, model, ctx.get(), mode, gran);
        int64_t params = model.count_params();
        if (ctx) params += ctx->params().count();
        print_train_result(res, params);
    } else if (a.kind == "planner") {
        PlannerConfig cfg;
        cfg.d_ctx = a.d_ctx;
        cfg.d_hidden = a.d_hidden;
        cfg.d_rl = a.d_rl;
        cfg.radius = a.radius;
        cfg.vocab_size = tok.vocab_size();
        cfg.vocab_hash = tok.vocab_hash();
        cfg.seed = a.seed;
        Planner planner(cfg, tok);
        // A whole-document unit sees no prior outputs, so its planner trains
        // on static windows regardless of --dynamic.
        const bool dyn = dynamic && gran != Granularity::document;
        const bool para = gran == Granularity::paragraph;
        const auto train_ex = make_planner_examples(train, tok, a.radius, para, dyn);
        const auto valid_ex = make_planner_examples(valid, tok, a.radius, para, dyn);
        res = train_planner(planner, train_ex, valid_ex, train_config_of(a));
        save_planner(a.out, planner);
        print_train_result(res, planner.count_params());
        std::printf("valid_op_accuracy %.4f\n", planner_accuracy(planner, valid_ex));
        const auto per_class = planner_class_accuracy(planner, valid_ex);
        for (int k = 0; k < kNumOps; ++k)
            std::printf("valid_op_accuracy[%s] %.4f\n", op_name(static_cast<Op>(k)),
                        per_class[static_cast<size_t>(k)]);
    } else {
        throw UsageError("--kind must be 'simplifier' or 'planner'");
    }
    const std::string log_path = write_train_log(a.out, res);
    write_manifest(a.out + ".manifest.json", "train", argv, a.seed, {a.out, log_path});
}

// -------------------------------------------------------------------- plan

struct PlanArgs {
    std::string data_dir;
    std::string model;
    std::string input;
    std::string out;
    int level = -1;  // -1: each pair's own target level
    uint64_t seed = 13;
};

void cmd_plan(const PlanArgs& a, const std::vector<std::string>& argv) {
    const Tokenizer tok = load_data_tokenizer(a.data_dir);
    std::unique_ptr<Planner> planner = load_planner(a.model, tok);
    const AlignedCorpus corpus = load_corpus(a.input, "input");
    std::vector<Plan> plans;
    plans.reserve(corpus.pairs.size());
    for (const AlignedPair& pair : corpus.pairs) {
        const int level = a.level >= 0 ? a.level : pair.simple_doc.reading_level;
        plans.push_back(plan_document_static(*planner, pair.complex_doc, level));
    }
    save_plans(plans, a.out);
    std::printf("wrote %s (%zu plans)\n", a.out.c_str(), plans.size());
    write_manifest(a.out + ".manifest.json", "plan", argv, a.seed, {a.out});
}

// ------------------------------------------------------- simplify / bench

// Flags shared by the two inference commands.
struct RunArgs {
    std::string data_dir;
    std::string model;
    std::string planner;
    std::string input;
    std::string plans_file;
    std::string plan = "none";       // none, predicted, oracle
    std::string context = "auto";    // on, off, auto (follow the checkpoint)
    std::string dynamic = "on";
    std::string granularity;         // empty: follow the checkpoint
    int beam = 5;
    int batch_size = 8;
    int max_len = 1024;
    int level = -1;
    uint64_t seed = 13;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--data-dir", a.data_dir, "directory with vocab")->required();
    cmd->add_option("--model", a.model, "simplifier checkpoint")->required();
    cmd->add_option("--planner", a.planner, "planner checkpoint (predicted plans)");
    cmd->add_option("--input", a.input, "corpus to simplify")->required();
    cmd->add_option("--plan", a.plan, "plan source: none, predicted or oracle");
    cmd->add_option("--plans", a.plans_file, "plan file standing in for gold operations");
    cmd->add_option("--context", a.context, "context windows: on, off or auto");
    cmd->add_option("--dynamic", a.dynamic,
                    "on: windows read prior outputs; off: complex document only");
    cmd->add_option("--granularity", a.granularity,
                    "unit size: sent, para or doc (default: the checkpoint's)");
    cmd->add_option("--beam", a.beam, "beam size (1 = greedy)");
    cmd->add_option("--batch-size", a.batch_size, "documents per batched step");
    cmd->add_option("--max-len", a.max_len, "generation length cap");
    cmd->add_option("--level", a.level, "target level (default: each pair's own)");
    cmd->add_option("--seed", a.seed, "random seed");
}

struct RunSetup {
    Tokenizer tok;
    LoadedSimplifier bundle;
    std::unique_ptr<Planner> planner;
    Strategy strat;
    std::vector<Document> docs;
    std::vector<int> levels;
    std::optional<std::vector<Plan>> plans;
};

RunSetup prepare_run(const RunArgs& a) {
    RunSetup r;
    r.tok = load_data_tokenizer(a.data_dir);
    r.bundle = load_simplifier(a.model, r.tok);

    PlanSource plan = PlanSource::none;
    try {
        plan = plan_source_from_name(a.plan);
    } catch (const ValidationError&) {
        throw UsageError("--plan must be 'none', 'predicted' or 'oracle'");
    }
    if (plan == PlanSource::predicted && a.planner.empty())
        throw UsageError("--plan predicted needs --planner");
    if (plan != PlanSource::predicted && !a.planner.empty())
        throw UsageError("--planner only applies with --plan predicted");
    if (!a.plans_file.empty() && plan != PlanSource::oracle)
        throw UsageError("--plans only applies with --plan oracle");
    if (plan == PlanSource::predicted) r.planner = load_planner(a.planner, r.tok);

    bool use_context = r.bundle.ctx != nullptr;
    if (a.context != "auto") {
        use_context = parse_on_off(a.context, "--context");
        if (use_context && r.bundle.ctx == nullptr)
            throw UsageError("--context on: the model has no context encoder");
        if (!use_context && r.bundle.ctx != nullptr)
            throw UsageError("--context off: the model requires context windows");
    }

    r.strat.mode = r.bundle.mode;
    r.strat.granularity = a.granularity.empty()
                              ? r.bundle.granularity
                              : parse_granularity(a.granularity, "--granularity");
    r.strat.plan = plan;
    r.strat.use_context = use_context;
    r.strat.dynamic = parse_on_off(a.dynamic, "--dynamic");
    r.strat.beam_size = a.beam;
    r.strat.max_len = a.max_len;
    r.strat.batch_size = a.batch_size;

    const AlignedCorpus corpus = load_corpus(a.input, "input");
    for (const AlignedPair& pair : corpus.pairs) {
        r.docs.push_back(pair.complex_doc);
        r.levels.push_back(a.level >= 0 ? a.level : pair.simple_doc.reading_level);
    }

    if (plan == PlanSource::oracle) {
        r.plans.emplace();
        if (a.plans_file.empty()) {
            for (const AlignedPair& pair : corpus.pairs)
                r.plans->push_back(Plan{pair.complex_doc.doc_id, pair.ops});
        } else {
            const std::vector<Plan> loaded = load_plans(a.plans_file);
            std::map<std::string, const Plan*> by_id;
            for (const Plan& p : loaded) by_id[p.doc_id] = &p;
            for (const Document& doc : r.docs) {
                auto it = by_id.find(doc.doc_id);
                if (it == by_id.end())
                    throw ValidationError("no plan for document '" + doc.doc_id + "' in '" +
                                          a.plans_file + "'");
                r.plans->push_back(*it->second);
            }
        }
    }
    return r;
}

struct SimplifyArgs {
    RunArgs run;
    std::string out;
    bool sequential = false;
};

void cmd_simplify(const SimplifyArgs& a, const std::vector<std::string>& argv) {
    RunSetup r = prepare_run(a.run);
    Pipeline pipe(*r.bundle.model, r.bundle.ctx.get(), r.planner.get(), r.tok, r.strat);
    const std::vector<SimplifiedDoc> out =
        pipe.run_documents(r.docs, r.levels, r.plans ? &*r.plans : nullptr, !a.sequential);
    save_simplified(out, a.out);
    std::printf("wrote %s (%zu documents)\n", a.out.c_str(), out.size());
    write_manifest(a.out + ".manifest.json", "simplify", argv, a.run.seed, {a.out});
}

struct BenchArgs {
    std::string data_dir;
    std::vector<std::string> systems;  // name=model.ckpt or name=model.ckpt+planner.ckpt
    std::string input;
    std::string out;
    std::string dynamic = "on";
    int reps = 1;
    int beam = 1;
    int batch_size = 16;
    int max_len = 1024;
    int level = -1;
    uint64_t seed = 13;
};

struct BenchSystem {
    std::string name;
    std::string model_path;
    std::string planner_path;  // empty: no planner in the pipeline
};

BenchSystem parse_bench_system(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
        throw UsageError(
            "--system entries must look like name=model.ckpt or name=model.ckpt+planner.ckpt");
    BenchSystem s;
    s.name = spec.substr(0, eq);
    const std::string paths = spec.substr(eq + 1);
    const auto plus = paths.find('+');
    if (plus == std::string::npos) {
        s.model_path = paths;
    } else {
        s.model_path = paths.substr(0, plus);
        s.planner_path = paths.substr(plus + 1);
        if (s.model_path.empty() || s.planner_path.empty())
            throw UsageError("--system '" + s.name + "': empty checkpoint path");
    }
    return s;
}

// Times each listed system over the same corpus: wall clock around full
// inference, divided by the source sentence count so rows stay comparable
// across systems that split or delete. One untimed pass per system warms
// caches and the allocator before the timed repetitions.
void cmd_bench(const BenchArgs& a, const std::vector<std::string>& argv) {
    if (a.systems.empty()) throw UsageError("bench needs at least one --system");
    if (a.reps < 1) throw UsageError("--reps must be at least 1");
    const bool dynamic = parse_on_off(a.dynamic, "--dynamic");
    const Tokenizer tok = load_data_tokenizer(a.data_dir);
    const AlignedCorpus corpus = load_corpus(a.input, "input");
    std::vector<Document> docs;
    std::vector<int> levels;
    long sentences = 0;
    for (const AlignedPair& pair : corpus.pairs) {
        docs.push_back(pair.complex_doc);
        levels.push_back(a.level >= 0 ? a.level : pair.simple_doc.reading_level);
        sentences += static_cast<long>(pair.complex_doc.sentences.size());
    }

    std::ostringstream csv;
    csv << "system,params,params_detail,sentences,ms_total,ms_per_sentence\n";
    for (const std::string& spec : a.systems) {
        const BenchSystem sys = parse_bench_system(spec);
        LoadedSimplifier bundle = load_simplifier(sys.model_path, tok);
        std::unique_ptr<Planner> planner;
        if (!sys.planner_path.empty()) planner = load_planner(sys.planner_path, tok);

        Strategy strat;
        strat.mode = bundle.mode;
        strat.granularity = bundle.granularity;
        strat.plan = planner ? PlanSource::predicted : PlanSource::none;
        strat.use_context = bundle.ctx != nullptr;
        strat.dynamic = dynamic;
        strat.beam_size = a.beam;
        strat.max_len = a.max_len;
        strat.batch_size = a.batch_size;
        Pipeline pipe(*bundle.model, bundle.ctx.get(), planner.get(), tok, strat);

        pipe.run_documents(docs, levels, nullptr, /*batched=*/true);  // warm-up, untimed
        double ms_total = 0.0;
        for (int rep = 0; rep < a.reps; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            pipe.run_documents(docs, levels, nullptr, /*batched=*/true);
            const auto t1 = std::chrono::steady_clock::now();
            ms_total += std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        ms_total /= a.reps;  // mean per pass

        int64_t model_params = bundle.model->count_params();
        if (bundle.ctx) model_params += bundle.ctx->params().count();
        const int64_t planner_params = planner ? planner->count_params() : 0;
        const int64_t total_params = model_params + planner_params;
        std::string detail = std::to_string(model_params);
        if (planner) detail = std::to_string(planner_params) + "+" + std::to_string(model_params);

        char nums[64];
        std::snprintf(nums, sizeof nums, "%.3f,%.3f\n", ms_total,
                      sentences > 0 ? ms_total / static_cast<double>(sentences) : 0.0);
        csv << sys.name << ',' << total_params << ',' << detail << ',' << sentences << ','
            << nums;
    }
    std::ofstream os(a.out, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open '" + a.out + "' for writing");
    os << csv.str();
    if (!os) throw ValidationError("write to '" + a.out + "' failed");
    std::fputs(csv.str().c_str(), stdout);
    // Timing changes run to run, so the benchmark CSV is exempt from the
    // manifest checksum contract: record the command but no output sums.
    write_manifest(a.out + ".manifest.json", "bench", argv, a.seed, {});
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string corpus;
    std::vector<std::string> outputs;  // name=path
    std::string out;
    std::string granularity = "document";
    uint64_t seed = 13;
};

std::string joined(const std::vector<std::string>& xs) { return join_sentences(xs); }

void cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
    const AlignedCorpus corpus = load_corpus(a.corpus, "test");
    if (a.granularity != "document" && a.granularity != "doc" && a.granularity != "sentence" &&
        a.granularity != "sent")
        throw UsageError("--granularity must be 'document' or 'sentence'");
    const bool by_sentence = a.granularity == "sentence" || a.granularity == "sent";

    std::vector<EvalRow> rows;
    {
        std::vector<EvalUnit> units;
        for (const AlignedPair& pair : corpus.pairs) {
            if (by_sentence) {
                for (size_t i = 0; i < pair.complex_doc.sentences.size(); ++i) {
                    EvalUnit u;
                    u.source = pair.complex_doc.sentences[i];
                    u.output = u.source;
                    std::string ref;
                    for (int j : pair.alignment[i]) {
                        if (!ref.empty()) ref += ' ';
                        ref += pair.simple_doc.sentences[static_cast<size_t>(j)];
                    }
                    u.refs = {ref};
                    units.push_back(std::move(u));
                }
            } else {
                EvalUnit u;
                u.source = joined(pair.complex_doc.sentences);
                u.output = u.source;
                u.refs = {joined(pair.simple_doc.sentences)};
                units.push_back(std::move(u));
            }
        }
        rows.push_back(evaluate_units("identity", units));
    }

    for (const std::string& spec : a.outputs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw UsageError("--outputs entries must look like name=path");
        const std::string name = spec.substr(0, eq);
        const std::string path = spec.substr(eq + 1);
        const std::vector<SimplifiedDoc> docs = load_simplified(path);
        std::map<std::string, const SimplifiedDoc*> by_id;
        for (const SimplifiedDoc& d : docs) by_id[d.doc_id] = &d;
        std::vector<EvalUnit> units;
        for (const AlignedPair& pair : corpus.pairs) {
            auto it = by_id.find(pair.complex_doc.doc_id);
            if (it == by_id.end())
                throw ValidationError("'" + path + "' has no output for document '" +
                                      pair.complex_doc.doc_id + "'");
            const SimplifiedDoc& d = *it->second;
            if (by_sentence) {
                std::map<int, const UnitRecord*> by_index;
                for (const UnitRecord& rec : d.records) {
                    if (rec.count != 1)
                        throw ValidationError("'" + path + "': outputs of '" + d.doc_id +
                                              "' are not sentence units; sentence-level "
                                              "evaluation needs a sentence-granularity system");
                    by_index[rec.begin] = &rec;
                }
                if (by_index.size() != pair.complex_doc.sentences.size())
                    throw ValidationError("'" + path + "': provenance of '" + d.doc_id +
                                          "' does not cover every source sentence");
                for (size_t i = 0; i < pair.complex_doc.sentences.size(); ++i) {
                    auto rit = by_index.find(static_cast<int>(i));
                    if (rit == by_index.end())
                        throw ValidationError("'" + path + "': provenance of '" + d.doc_id +
                                              "' skips sentence " + std::to_string(i));
                    EvalUnit u;
                    u.source = pair.complex_doc.sentences[i];
                    u.output = joined(rit->second->outputs);
                    std::string ref;
                    for (int j : pair.alignment[i]) {
                        if (!ref.empty()) ref += ' ';
                        ref += pair.simple_doc.sentences[static_cast<size_t>(j)];
                    }
                    u.refs = {ref};
                    units.push_back(std::move(u));
                }
            } else {
                EvalUnit u;
                u.source = joined(pair.complex_doc.sentences);
                u.output = d.text();
                u.refs = {joined(pair.simple_doc.sentences)};
                units.push_back(std::move(u));
            }
        }
        rows.push_back(evaluate_units(name, units));
    }

    const std::string csv = eval_csv(rows);
    std::ofstream os(a.out, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open '" + a.out + "' for writing");
    os << csv;
    if (!os) throw ValidationError("write to '" + a.out + "' failed");
    std::fputs(csv.c_str(), stdout);
    write_manifest(a.out + ".manifest.json", "evaluate", argv, a.seed, {a.out});
}

// ------------------------------------------------------------------- rerun

struct RerunArgs {
    std::string manifest;
};

void cmd_rerun(const RerunArgs& a) {
    const std::string bytes = read_file_bytes(a.manifest);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(a.manifest + ": bad JSON: " + e.what());
    }
    std::vector<std::string> args;
    std::map<std::string, std::string> expected;
    std::string command;
    try {
        command = j.at("command").get<std::string>();
        for (const auto& s : j.at("args")) args.push_back(s.get<std::string>());
        for (const auto& [path, sum] : j.at("outputs").items())
            expected[path] = sum.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(a.manifest + ": bad manifest: " + e.what());
    }
    if (command == "rerun") throw ValidationError("manifest records a rerun; refusing to loop");
    std::printf("rerunning: %s\n", command.c_str());
    const int code = run_cli(args);
    if (code != 0)
        throw ValidationError("rerun: recorded command failed with exit code " +
                              std::to_string(code));
    for (const auto& [path, sum] : expected) {
        const std::string now = checksum_hex(read_file_bytes(path));
        if (now != sum)
            throw ValidationError("rerun: '" + path + "' differs from the recorded output");
        std::printf("ok %s\n", path.c_str());
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"plan-guided, context-aware document simplification toolkit"};
    app.require_subcommand(1);

    GenerateArgs ga;
    TrainArgs ta;
    PlanArgs pa;
    SimplifyArgs sa;
    EvaluateArgs ea;
    BenchArgs ba;
    RerunArgs ra;

    CLI::App* gen = app.add_subcommand("generate-data", "synthesize aligned corpora");
    gen->add_option("--out-dir", ga.out_dir, "output directory")->required();
    gen->add_option("--train-docs", ga.train_docs, "articles in the train split");
    gen->add_option("--valid-docs", ga.valid_docs, "articles in the valid split");
    gen->add_option("--test-docs", ga.test_docs, "articles in the test split");
    gen->add_option("--min-sentences", ga.min_sentences, "minimum sentences per article");
    gen->add_option("--max-sentences", ga.max_sentences, "maximum sentences per article");
    gen->add_option("--levels", ga.levels, "target reading levels, comma separated");
    gen->add_option("--op-dist", ga.op_dist, "copy,rephrase,split,delete weights");
    gen->add_option("--level-skew", ga.level_skew, "split/delete weight growth per level");
    gen->add_option("--adj-prob", ga.adj_prob, "adjective probability");
    gen->add_option("--adv-prob", ga.adv_prob, "adverb probability");
    gen->add_flag("--cue-rule", ga.cue_rule, "operations dictated by cue words");
    gen->add_option("--seed", ga.seed, "random seed");

    CLI::App* tr = app.add_subcommand("train", "train a simplifier or planner");
    tr->add_option("--data-dir", ta.data_dir, "directory with vocab and splits")->required();
    tr->add_option("--out", ta.out, "checkpoint path")->required();
    tr->add_option("--kind", ta.kind, "simplifier or planner");
    tr->add_option("--mode", ta.mode,
                   "plain, guided, multitask_prefix or multitask_sep");
    tr->add_option("--granularity", ta.granularity, "unit size: sent, para or doc");
    tr->add_option("--dynamic", ta.dynamic,
                   "on: left windows read gold outputs; off: complex document only");
    tr->add_flag("--context", ta.context, "context cross-attention simplifier");
    tr->add_flag("--ctx-shared-norm", ta.ctx_shared_norm,
                 "context attention shares the encoder-attention norm");
    tr->add_option("--radius", ta.radius, "context window radius");
    tr->add_option("--d-model", ta.d_model, "model width");
    tr->add_option("--n-heads", ta.n_heads, "attention heads");
    tr->add_option("--enc-layers", ta.enc_layers, "encoder layers");
    tr->add_option("--dec-layers", ta.dec_layers, "decoder layers");
    tr->add_option("--ffn-dim", ta.ffn_dim, "feed-forward width");
    tr->add_option("--max-len", ta.max_len, "maximum sequence length");
    tr->add_option("--dropout", ta.dropout, "dropout probability");
    tr->add_option("--attention", ta.attention, "encoder self-attention: full or sliding");
    tr->add_option("--window", ta.window, "sliding window half-width");
    tr->add_option("--global-tokens", ta.global_tokens, "leading global positions");
    tr->add_option("--d-ctx", ta.d_ctx, "context vector width");
    tr->add_option("--d-hidden", ta.d_hidden, "planner hidden width");
    tr->add_option("--d-rl", ta.d_rl, "planner reading-level embedding width");
    tr->add_option("--epochs", ta.epochs, "maximum epochs");
    tr->add_option("--batch-size", ta.batch_size, "examples per step");
    tr->add_option("--lr", ta.lr, "learning rate");
    tr->add_option("--patience", ta.patience, "validation rises before stopping");
    tr->add_option("--seed", ta.seed, "random seed");
    tr->add_flag("--verbose", ta.verbose, "per-epoch losses on stderr");

    CLI::App* pl = app.add_subcommand("plan", "predict static sentence plans");
    pl->add_option("--data-dir", pa.data_dir, "directory with vocab")->required();
    pl->add_option("--model", pa.model, "planner checkpoint")->required();
    pl->add_option("--input", pa.input, "corpus to plan over")->required();
    pl->add_option("--out", pa.out, "plan file")->required();
    pl->add_option("--level", pa.level, "target level (default: each pair's own)");
    pl->add_option("--seed", pa.seed, "random seed");

    CLI::App* si = app.add_subcommand("simplify", "simplify documents");
    add_run_options(si, sa.run);
    si->add_option("--out", sa.out, "simplified output file")->required();
    si->add_flag("--sequential", sa.sequential, "document-at-a-time reference driver");

    CLI::App* ev = app.add_subcommand("evaluate", "score outputs against references");
    ev->add_option("--corpus", ea.corpus, "reference corpus")->required();
    ev->add_option("--outputs", ea.outputs, "system outputs as name=path (repeatable)")
        ->type_size(1);
    ev->add_option("--out", ea.out, "CSV path")->required();
    ev->add_option("--granularity", ea.granularity, "document or sentence");
    ev->add_option("--seed", ea.seed, "random seed");

    CLI::App* be = app.add_subcommand("bench", "time systems end to end");
    be->add_option("--data-dir", ba.data_dir, "directory with vocab")->required();
    be->add_option("--system", ba.systems,
                   "name=model.ckpt or name=model.ckpt+planner.ckpt (repeatable)")
        ->required()
        ->type_size(1);
    be->add_option("--input", ba.input, "corpus to time over")->required();
    be->add_option("--out", ba.out, "CSV path")->required();
    be->add_option("--dynamic", ba.dynamic,
                   "on: windows read prior outputs; off: complex document only");
    be->add_option("--reps", ba.reps, "timed repetitions per system");
    be->add_option("--beam", ba.beam, "beam size (1 = greedy)");
    be->add_option("--batch-size", ba.batch_size, "documents per batched step");
    be->add_option("--max-len", ba.max_len, "generation length cap");
    be->add_option("--level", ba.level, "target level (default: each pair's own)");
    be->add_option("--seed", ba.seed, "random seed");

    CLI::App* re = app.add_subcommand("rerun", "re-execute a manifest and verify outputs");
    re->add_option("--manifest", ra.manifest, "manifest file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
        if (*gen) cmd_generate(ga, args);
        if (*tr) cmd_train(ta, args);
        if (*pl) cmd_plan(pa, args);
        if (*si) cmd_simplify(sa, args);
        if (*ev) cmd_evaluate(ea, args);
        if (*be) cmd_bench(ba, args);
        if (*re) cmd_rerun(ra);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace docsimp
