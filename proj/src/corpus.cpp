#include "docsimp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "docsimp/errors.hpp"
#include "docsimp/rng.hpp"

namespace docsimp {

using nlohmann::json;

namespace {

// Closed generator lexicon. Complex words map 1:1 onto simple words under
// the rephrase operation; cue and function words are never substituted.
const std::vector<std::string> kNounsC = {"magistrate", "physician", "adversary", "domicile",
                                          "automobile", "beverage",  "canine",    "feline",
                                          "infant",     "educator"};
const std::vector<std::string> kNounsS = {"judge", "doctor", "enemy", "home",  "car",
                                          "drink", "dog",    "cat",   "baby",  "teacher"};
const std::vector<std::string> kVerbsC = {"purchases", "observes", "constructs", "demolishes",
                                          "transports", "examines", "requires",  "obtains",
                                          "repairs",    "conceals"};
const std::vector<std::string> kVerbsS = {"buys",  "sees", "builds", "breaks", "moves",
                                          "checks", "needs", "gets",  "fixes",  "hides"};
const std::vector<std::string> kAdjsC = {"enormous", "diminutive", "antiquated",
                                         "pristine", "luminous",   "obscure"};
const std::vector<std::string> kAdjsS = {"huge", "small", "old", "new", "bright", "dark"};
const std::vector<std::string> kAdvs = {"quickly", "slowly", "quietly", "loudly"};
const std::vector<std::string> kConjs = {"and", "but"};
// Cue words, indexed by Op value.
const std::vector<std::string> kCues = {"kara", "lumo", "pesh", "tivo"};

const std::map<std::string, std::string>& rephrase_lexicon() {
    static const std::map<std::string, std::string> lex = [] {
        std::map<std::string, std::string> m;
        for (size_t i = 0; i < kNounsC.size(); ++i) m[kNounsC[i]] = kNounsS[i];
        for (size_t i = 0; i < kVerbsC.size(); ++i) m[kVerbsC[i]] = kVerbsS[i];
        for (size_t i = 0; i < kAdjsC.size(); ++i) m[kAdjsC[i]] = kAdjsS[i];
        return m;
    }();
    return lex;
}

std::vector<double> level_weights(const GenSpec& spec, int level) {
    std::vector<double> w(4, 0.0);
    for (const auto& [op, p] : spec.op_distribution) w[static_cast<int>(op)] = p;
    if (level > 2) {
        const double f = 1.0 + spec.level_skew * (level - 2);
        w[static_cast<int>(Op::split)] *= f;
        w[static_cast<int>(Op::del)] *= f;
    }
    return w;
}

// One clause: det (adj)? noun (adv)? verb det (adj)? noun.
std::vector<std::string> gen_clause(Rng& rng, const GenSpec& spec) {
    std::vector<std::string> t;
    t.push_back("the");
    if (rng.uniform() < spec.adj_prob) t.push_back(kAdjsC[rng.below_int((int)kAdjsC.size())]);
    t.push_back(kNounsC[rng.below_int((int)kNounsC.size())]);
    if (rng.uniform() < spec.adv_prob) t.push_back(kAdvs[rng.below_int((int)kAdvs.size())]);
    t.push_back(kVerbsC[rng.below_int((int)kVerbsC.size())]);
    t.push_back("the");
    if (rng.uniform() < spec.adj_prob) t.push_back(kAdjsC[rng.below_int((int)kAdjsC.size())]);
    t.push_back(kNounsC[rng.below_int((int)kNounsC.size())]);
    return t;
}

std::string join_tokens(const std::vector<std::string>& toks) {
    std::string s;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) s.push_back(' ');
        s += toks[i];
    }
    return s;
}

// Paragraph ids inherited across deletions may skip numbers; renumber the
// non-decreasing sequence into dense 0-based runs.
void densify_para_index(std::vector<int>& para) {
    int prev_old = 0, next = 0;
    for (size_t i = 0; i < para.size(); ++i) {
        if (i > 0 && para[i] != prev_old) ++next;
        prev_old = para[i];
        para[i] = next;
    }
}

// Every complex sentence is two clauses around a conjunction, so any
// operation (including split) applies to any sentence. The optional cue
// leads the first clause and stays in the first half under a split.
struct RawSentence {
    std::vector<std::string> clause1, clause2;
    std::string conj;
    std::string cue;  // empty when cue_rule is off

    std::string complex_text() const {
        std::vector<std::string> t;
        if (!cue.empty()) t.push_back(cue);
        t.insert(t.end(), clause1.begin(), clause1.end());
        t.push_back(conj);
        t.insert(t.end(), clause2.begin(), clause2.end());
        t.push_back(".");
        return join_tokens(t);
    }

    std::vector<std::string> apply(Op op) const {
        switch (op) {
            case Op::copy:
                return {complex_text()};
            case Op::rephrase: {
                auto toks = Tokenizer::split_ws(complex_text());
                const auto& lex = rephrase_lexicon();
                for (auto& w : toks) {
                    auto it = lex.find(w);
                    if (it != lex.end()) w = it->second;
                }
                return {join_tokens(toks)};
            }
            case Op::split: {
                std::vector<std::string> first;
                if (!cue.empty()) first.push_back(cue);
                first.insert(first.end(), clause1.begin(), clause1.end());
                first.push_back(".");
                std::vector<std::string> second = clause2;
                second.push_back(".");
                return {join_tokens(first), join_tokens(second)};
            }
            case Op::del:
                return {};
        }
        throw std::invalid_argument("apply: bad op");
    }
};

}  // namespace

std::string join_sentences(const std::vector<std::string>& sentences, int begin, int end) {
    if (end < 0) end = static_cast<int>(sentences.size());
    std::string s;
    for (int i = begin; i < end; ++i) {
        if (i > begin) s.push_back(' ');
        s += sentences[static_cast<size_t>(i)];
    }
    return s;
}

std::string article_key(const std::string& doc_id) {
    auto pos = doc_id.find(':');
    return pos == std::string::npos ? doc_id : doc_id.substr(0, pos);
}

std::vector<std::string> generator_vocabulary() {
    std::vector<std::string> v;
    auto add = [&v](const std::vector<std::string>& xs) {
        v.insert(v.end(), xs.begin(), xs.end());
    };
    add(kNounsC);
    add(kNounsS);
    add(kVerbsC);
    add(kVerbsS);
    add(kAdjsC);
    add(kAdjsS);
    add(kAdvs);
    add(kConjs);
    add(kCues);
    v.push_back("the");
    v.push_back(".");
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

AlignedCorpus generate_synthetic(const GenSpec& spec) {
    if (spec.num_docs < 0 || spec.min_sentences < 1 || spec.max_sentences < spec.min_sentences)
        throw ValidationError("corpus: invalid generator sentence bounds");
    double total = 0.0;
    for (const auto& [op, p] : spec.op_distribution) {
        if (p < 0.0) throw ValidationError("corpus: negative op probability");
        total += p;
    }
    if (total <= 0.0) throw ValidationError("corpus: op distribution sums to zero");
    for (int lvl : spec.target_levels)
        if (lvl < 1 || lvl > 4) throw ValidationError("corpus: target level out of range 1..4");

    AlignedCorpus corpus;
    corpus.split_tag = spec.split_tag;

    char key[32];
    for (int d = 0; d < spec.num_docs; ++d) {
        const int article = spec.article_start + d;
        std::snprintf(key, sizeof key, "art%04d", article);

        // Article content is fixed across its reading-level variants.
        Rng art_rng(fnv1a(&article, sizeof article, spec.seed * 0x9E3779B97F4A7C15ull + 1));
        const int n = spec.min_sentences +
                      art_rng.below_int(spec.max_sentences - spec.min_sentences + 1);
        std::vector<RawSentence> raw(static_cast<size_t>(n));
        std::vector<int> para(static_cast<size_t>(n));
        int para_id = 0, left_in_para = 0;
        for (int i = 0; i < n; ++i) {
            if (left_in_para == 0) {
                left_in_para = 1 + art_rng.below_int(3);
                if (i > 0) ++para_id;
            }
            para[i] = para_id;
            --left_in_para;
            raw[i].clause1 = gen_clause(art_rng, spec);
            raw[i].clause2 = gen_clause(art_rng, spec);
            raw[i].conj = kConjs[art_rng.below_int((int)kConjs.size())];
        }

        // Cue classes drawn once per article; cue of sentence i+1 dictates
        // the operation applied to sentence i in every variant.
        std::vector<int> cue_class(static_cast<size_t>(n), 0);
        if (spec.cue_rule) {
            auto w = level_weights(spec, 2);
            for (int i = 0; i < n; ++i) {
                cue_class[i] = art_rng.discrete(w);
                raw[i].cue = kCues[static_cast<size_t>(cue_class[i])];
            }
        }

        for (int lvl : spec.target_levels) {
            AlignedPair pair;
            pair.complex_doc.doc_id = std::string(key) + ":0-" + std::to_string(lvl);
            pair.complex_doc.reading_level = 0;
            pair.complex_doc.para_index = para;
            pair.simple_doc.doc_id = pair.complex_doc.doc_id;
            pair.simple_doc.reading_level = lvl;

            Rng var_rng(fnv1a(&article, sizeof article,
                              spec.seed * 0x9E3779B97F4A7C15ull + 7919ull * lvl));
            auto weights = level_weights(spec, lvl);
            int simple_idx = 0;
            for (int i = 0; i < n; ++i) {
                pair.complex_doc.sentences.push_back(raw[i].complex_text());
                Op op;
                if (spec.cue_rule)
                    op = i + 1 < n ? static_cast<Op>(cue_class[i + 1]) : Op::copy;
                else
                    op = static_cast<Op>(var_rng.discrete(weights));
                pair.ops.push_back(op);
                std::vector<int> align;
                for (const auto& s : raw[i].apply(op)) {
                    pair.simple_doc.sentences.push_back(s);
                    pair.simple_doc.para_index.push_back(para[i]);
                    align.push_back(simple_idx++);
                }
                pair.alignment.push_back(std::move(align));
            }
            densify_para_index(pair.simple_doc.para_index);
            corpus.pairs.push_back(std::move(pair));
        }
    }
    return corpus;
}

std::vector<Op> derive_op_labels(const AlignedPair& pair) {
    const size_t n = pair.complex_doc.sentences.size();
    if (pair.alignment.size() != n)
        throw ValidationError("corpus: alignment length differs from complex sentence count");
    std::vector<Op> ops;
    ops.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& al = pair.alignment[i];
        if (al.empty()) {
            ops.push_back(Op::del);
        } else if (al.size() >= 2) {
            ops.push_back(Op::split);
        } else {
            const auto& s = pair.simple_doc.sentences.at(static_cast<size_t>(al[0]));
            ops.push_back(Tokenizer::normalize_ws(s) ==
                                  Tokenizer::normalize_ws(pair.complex_doc.sentences[i])
                              ? Op::copy
                              : Op::rephrase);
        }
    }
    return ops;
}

namespace {

void check_para_index(const Document& doc, const std::string& doc_id, const char* side,
                      ValidationReport& report) {
    if (doc.para_index.size() != doc.sentences.size()) {
        report.push_back({doc_id, "para_index_length",
                          std::string(side) + " para_index length differs from sentences"});
        return;
    }
    for (size_t i = 0; i < doc.para_index.size(); ++i) {
        const int p = doc.para_index[i];
        const int prev = i == 0 ? 0 : doc.para_index[i - 1];
        if ((i == 0 && p != 0) || p < prev || p > prev + 1) {
            report.push_back({doc_id, "para_index_monotone",
                              std::string(side) + " para_index not a 0-based run sequence"});
            return;
        }
    }
}

void validate_pair(const AlignedPair& pair, ValidationReport& report) {
    const std::string& id = pair.complex_doc.doc_id;
    const size_t n = pair.complex_doc.sentences.size();
    if (n == 0) report.push_back({id, "nonempty", "document has no sentences"});
    for (const auto& s : pair.complex_doc.sentences)
        if (Tokenizer::split_ws(s).empty())
            report.push_back({id, "sentence_nonempty", "blank complex sentence"});
    for (const auto& s : pair.simple_doc.sentences)
        if (Tokenizer::split_ws(s).empty())
            report.push_back({id, "sentence_nonempty", "blank simple sentence"});
    for (int lvl : {pair.complex_doc.reading_level, pair.simple_doc.reading_level})
        if (lvl < 0 || lvl > 4)
            report.push_back({id, "level_range", "reading level outside 0..4"});
    check_para_index(pair.complex_doc, id, "complex", report);
    check_para_index(pair.simple_doc, id, "simple", report);

    if (pair.alignment.size() != n || pair.ops.size() != n) {
        report.push_back({id, "alignment_length",
                          "alignment/ops length differs from complex sentence count"});
        return;
    }
    // The concatenated alignment must enumerate simple indices 0..m-1 in order.
    int expect = 0;
    for (size_t i = 0; i < n; ++i) {
        for (int idx : pair.alignment[i]) {
            if (idx != expect) {
                report.push_back({id, "alignment_partition",
                                  "alignment is not an ordered partition of simple indices"});
                return;
            }
            ++expect;
        }
    }
    if (expect != static_cast<int>(pair.simple_doc.sentences.size())) {
        report.push_back({id, "alignment_partition",
                          "alignment does not cover all simple sentences"});
        return;
    }
    const auto derived = derive_op_labels(pair);
    for (size_t i = 0; i < n; ++i)
        if (derived[i] != pair.ops[i]) {
            report.push_back({id, "ops_consistent",
                              "ops[" + std::to_string(i) + "] = " + op_name(pair.ops[i]) +
                                  " but alignment implies " + op_name(derived[i])});
            break;
        }
}

}  // namespace

ValidationReport validate_corpus(const AlignedCorpus& corpus) {
    ValidationReport report;
    std::set<std::string> seen;
    for (const auto& pair : corpus.pairs) {
        if (!seen.insert(pair.complex_doc.doc_id).second)
            report.push_back({pair.complex_doc.doc_id, "doc_id_unique", "duplicate doc_id"});
        if (pair.simple_doc.doc_id != pair.complex_doc.doc_id)
            report.push_back({pair.complex_doc.doc_id, "doc_id_match",
                              "complex and simple sides carry different doc_ids"});
        validate_pair(pair, report);
    }
    return report;
}

ValidationReport validate_corpora(const std::vector<const AlignedCorpus*>& corpora) {
    ValidationReport report;
    std::map<std::string, std::string> article_split;
    for (const AlignedCorpus* c : corpora) {
        auto sub = validate_corpus(*c);
        report.insert(report.end(), sub.begin(), sub.end());
        for (const auto& pair : c->pairs) {
            const std::string key = article_key(pair.complex_doc.doc_id);
            auto [it, inserted] = article_split.emplace(key, c->split_tag);
            if (!inserted && it->second != c->split_tag)
                report.push_back({pair.complex_doc.doc_id, "split_discipline",
                                  "article " + key + " appears in splits " + it->second +
                                      " and " + c->split_tag});
        }
    }
    return report;
}

namespace {

json pair_to_json(const AlignedPair& pair) {
    json j;
    j["doc_id"] = pair.complex_doc.doc_id;
    j["level_src"] = pair.complex_doc.reading_level;
    j["level_tgt"] = pair.simple_doc.reading_level;
    j["complex"] = pair.complex_doc.sentences;
    j["simple"] = pair.simple_doc.sentences;
    j["para_index"] = pair.complex_doc.para_index;
    j["alignment"] = pair.alignment;
    std::vector<std::string> ops;
    for (Op op : pair.ops) ops.emplace_back(op_name(op));
    j["ops"] = ops;
    return j;
}

AlignedPair pair_from_json(const json& j, int line_no) {
    const char* keys[] = {"doc_id", "level_src", "level_tgt", "complex",
                          "simple", "para_index", "alignment", "ops"};
    for (const char* k : keys)
        if (!j.contains(k))
            throw ValidationError("corpus: line " + std::to_string(line_no) +
                                  ": missing key '" + k + "'");
    AlignedPair pair;
    pair.complex_doc.doc_id = j.at("doc_id").get<std::string>();
    pair.simple_doc.doc_id = pair.complex_doc.doc_id;
    pair.complex_doc.reading_level = j.at("level_src").get<int>();
    pair.simple_doc.reading_level = j.at("level_tgt").get<int>();
    pair.complex_doc.sentences = j.at("complex").get<std::vector<std::string>>();
    pair.simple_doc.sentences = j.at("simple").get<std::vector<std::string>>();
    pair.complex_doc.para_index = j.at("para_index").get<std::vector<int>>();
    pair.alignment = j.at("alignment").get<std::vector<std::vector<int>>>();
    for (const auto& s : j.at("ops").get<std::vector<std::string>>())
        pair.ops.push_back(op_from_name(s));
    // Simple-side paragraphs inherit from the aligned complex sentence.
    pair.simple_doc.para_index.assign(pair.simple_doc.sentences.size(), 0);
    for (size_t i = 0; i < pair.alignment.size() &&
                       i < pair.complex_doc.para_index.size(); ++i)
        for (int idx : pair.alignment[i])
            if (idx >= 0 && idx < static_cast<int>(pair.simple_doc.para_index.size()))
                pair.simple_doc.para_index[static_cast<size_t>(idx)] =
                    pair.complex_doc.para_index[i];
    densify_para_index(pair.simple_doc.para_index);
    return pair;
}

}  // namespace

AlignedCorpus load_corpus(const std::string& path, const std::string& split_tag) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("corpus: cannot open " + path);
    AlignedCorpus corpus;
    corpus.split_tag = split_tag;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("corpus: line " + std::to_string(line_no) + ": " + e.what());
        }
        corpus.pairs.push_back(pair_from_json(j, line_no));
    }
    return corpus;
}

void save_corpus(const AlignedCorpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("corpus: cannot write " + path);
    for (const auto& pair : corpus.pairs) out << pair_to_json(pair).dump() << '\n';
}

std::vector<Plan> load_plans(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("plan: cannot open " + path);
    std::vector<Plan> plans;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ValidationError("plan: line " + std::to_string(line_no) + ": missing tab");
        Plan p;
        p.doc_id = line.substr(0, tab);
        for (const auto& tok : Tokenizer::split_ws(line.substr(tab + 1)))
            p.ops.push_back(op_from_name(tok));
        plans.push_back(std::move(p));
    }
    return plans;
}

void save_plans(const std::vector<Plan>& plans, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("plan: cannot write " + path);
    for (const auto& p : plans) {
        out << p.doc_id << '\t';
        for (size_t i = 0; i < p.ops.size(); ++i) {
            if (i) out << ' ';
            out << op_name(p.ops[i]);
        }
        out << '\n';
    }
}

std::vector<std::string> collect_vocab(const AlignedCorpus& corpus) {
    std::set<std::string> words;
    for (const auto& pair : corpus.pairs) {
        for (const auto& s : pair.complex_doc.sentences)
            for (const auto& w : Tokenizer::split_ws(s)) words.insert(w);
        for (const auto& s : pair.simple_doc.sentences)
            for (const auto& w : Tokenizer::split_ws(s)) words.insert(w);
    }
    return {words.begin(), words.end()};
}

}  // namespace docsimp
