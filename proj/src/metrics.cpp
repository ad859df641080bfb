#include "docsimp/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "docsimp/errors.hpp"
#include "docsimp/segment.hpp"
#include "docsimp/tokenizer.hpp"

namespace docsimp {

std::vector<std::string> metric_tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            flush();
        } else if (std::isalnum(u)) {
            word.push_back(static_cast<char>(std::tolower(u)));
        } else {
            flush();
            out.emplace_back(1, c);
        }
    }
    flush();
    return out;
}

namespace {

// n-grams keyed by their joined surface form; '\x1f' cannot occur in tokens.
using Bag = std::unordered_map<std::string, double>;

Bag ngram_bag(const std::vector<std::string>& toks, int n) {
    Bag bag;
    for (int i = 0; i + n <= static_cast<int>(toks.size()); ++i) {
        std::string key = toks[static_cast<size_t>(i)];
        for (int j = 1; j < n; ++j) {
            key.push_back('\x1f');
            key += toks[static_cast<size_t>(i + j)];
        }
        bag[key] += 1.0;
    }
    return bag;
}

double bag_total(const Bag& b) {
    double t = 0.0;
    for (const auto& [k, v] : b) t += v;
    return t;
}

double overlap(const Bag& a, const Bag& b) {
    double t = 0.0;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        if (it != b.end()) t += std::min(v, it->second);
    }
    return t;
}

double get(const Bag& b, const std::string& k) {
    auto it = b.find(k);
    return it == b.end() ? 0.0 : it->second;
}

double f1(double hit, double out_total, double ref_total) {
    if (out_total == 0.0 && ref_total == 0.0) return 1.0;
    const double p = out_total > 0.0 ? hit / out_total : 0.0;
    const double r = ref_total > 0.0 ? hit / ref_total : 0.0;
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

SariScore sari(const std::string& source, const std::string& output,
               const std::vector<std::string>& refs) {
    if (refs.empty()) throw ValidationError("metrics: sari needs at least one reference");
    const auto stoks = metric_tokenize(source);
    const auto otoks = metric_tokenize(output);
    std::vector<std::vector<std::string>> rtoks;
    rtoks.reserve(refs.size());
    for (const auto& r : refs) rtoks.push_back(metric_tokenize(r));
    const double nref = static_cast<double>(refs.size());

    SariScore score;
    for (int n = 1; n <= 4; ++n) {
        const size_t k = static_cast<size_t>(n - 1);
        const Bag S = ngram_bag(stoks, n);
        const Bag O = ngram_bag(otoks, n);
        std::vector<Bag> R;
        R.reserve(rtoks.size());
        for (const auto& rt : rtoks) R.push_back(ngram_bag(rt, n));

        // add: output-new grams vs grams new in at least one reference.
        Bag add_out, add_ref;
        for (const auto& [g, c] : O) {
            const double d = c - get(S, g);
            if (d > 0.0) add_out[g] = d;
        }
        for (const auto& rb : R)
            for (const auto& [g, c] : rb) {
                const double d = c - get(S, g);
                if (d > 0.0) add_ref[g] = std::max(add_ref[g], d);
            }
        score.add_n[k] =
            100.0 * f1(overlap(add_out, add_ref), bag_total(add_out), bag_total(add_ref));

        // keep: grams retained by the system vs fraction-weighted retention
        // across references.
        Bag keep_out, keep_ref;
        for (const auto& [g, c] : S) {
            const double m = std::min(c, get(O, g));
            if (m > 0.0) keep_out[g] = m;
        }
        for (const auto& rb : R)
            for (const auto& [g, c] : S) {
                const double m = std::min(c, get(rb, g));
                if (m > 0.0) keep_ref[g] += m / nref;
            }
        score.keep_n[k] =
            100.0 * f1(overlap(keep_out, keep_ref), bag_total(keep_out), bag_total(keep_ref));

        // delete: precision of removed grams against mean removal.
        Bag del_out, del_ref;
        for (const auto& [g, c] : S) {
            const double d = c - get(O, g);
            if (d > 0.0) del_out[g] = d;
        }
        for (const auto& rb : R)
            for (const auto& [g, c] : S) {
                const double d = c - get(rb, g);
                if (d > 0.0) del_ref[g] += d / nref;
            }
        const double dtot = bag_total(del_out);
        if (dtot == 0.0 && bag_total(del_ref) == 0.0)
            score.del_n[k] = 100.0;
        else
            score.del_n[k] = dtot > 0.0 ? 100.0 * overlap(del_out, del_ref) / dtot : 0.0;
    }
    for (size_t k = 0; k < 4; ++k) {
        score.add += score.add_n[k] / 4.0;
        score.keep += score.keep_n[k] / 4.0;
        score.del += score.del_n[k] / 4.0;
    }
    score.sari = (score.add + score.keep + score.del) / 3.0;
    return score;
}

double corpus_bleu(const std::vector<std::string>& outputs,
                   const std::vector<std::vector<std::string>>& refs) {
    if (outputs.size() != refs.size())
        throw ValidationError("metrics: bleu output/reference count mismatch");
    double hits[4] = {0, 0, 0, 0};
    double totals[4] = {0, 0, 0, 0};
    double out_len = 0.0, ref_len = 0.0;
    for (size_t i = 0; i < outputs.size(); ++i) {
        if (refs[i].empty())
            throw ValidationError("metrics: bleu needs at least one reference per output");
        const auto otoks = metric_tokenize(outputs[i]);
        std::vector<std::vector<std::string>> rtoks;
        for (const auto& r : refs[i]) rtoks.push_back(metric_tokenize(r));

        out_len += static_cast<double>(otoks.size());
        long closest = -1;
        const long olen = static_cast<long>(otoks.size());
        for (const auto& rt : rtoks) {
            const long rl = static_cast<long>(rt.size());
            if (closest < 0 || std::labs(rl - olen) < std::labs(closest - olen) ||
                (std::labs(rl - olen) == std::labs(closest - olen) && rl < closest))
                closest = rl;
        }
        ref_len += static_cast<double>(closest);

        for (int n = 1; n <= 4; ++n) {
            const Bag O = ngram_bag(otoks, n);
            Bag clip;
            for (const auto& rt : rtoks)
                for (const auto& [g, c] : ngram_bag(rt, n))
                    clip[g] = std::max(clip[g], c);
            totals[n - 1] += bag_total(O);
            hits[n - 1] += overlap(O, clip);
        }
    }
    double logsum = 0.0;
    for (int n = 0; n < 4; ++n) {
        if (totals[n] == 0.0 || hits[n] == 0.0) return 0.0;
        logsum += 0.25 * std::log(hits[n] / totals[n]);
    }
    const double bp =
        out_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / std::max(out_len, 1e-12));
    return 100.0 * bp * std::exp(logsum);
}

int count_syllables(const std::string& word) {
    std::string w;
    for (char c : word) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalpha(u)) w.push_back(static_cast<char>(std::tolower(u)));
    }
    auto is_vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };
    int groups = 0;
    bool in_group = false;
    for (char c : w) {
        if (is_vowel(c)) {
            if (!in_group) ++groups;
            in_group = true;
        } else {
            in_group = false;
        }
    }
    if (w.size() >= 2 && w.back() == 'e') {
        // consonant + "le" endings keep their 'e' (a spoken syllable);
        // any other terminal 'e' is silent.
        const bool cons_le =
            w.size() >= 3 && w[w.size() - 2] == 'l' && !is_vowel(w[w.size() - 3]);
        if (!cons_le && groups > 1) --groups;
    }
    return std::max(groups, 1);
}

double fkgl(const std::string& text) {
    const auto sentences = resegment(text);
    if (sentences.empty())
        throw ValidationError("metrics: fkgl needs at least one sentence");
    const auto words = Tokenizer::split_ws(text);
    if (words.empty()) throw ValidationError("metrics: fkgl needs at least one word");
    long syllables = 0;
    for (const auto& w : words) syllables += count_syllables(w);
    const double nw = static_cast<double>(words.size());
    const double ns = static_cast<double>(sentences.size());
    return 0.39 * (nw / ns) + 11.8 * (static_cast<double>(syllables) / nw) - 15.59;
}

LengthStats length_stats(const std::vector<std::string>& sentences) {
    LengthStats st;
    st.sentences = static_cast<long>(sentences.size());
    for (const auto& s : sentences)
        st.tokens += static_cast<long>(Tokenizer::split_ws(s).size());
    return st;
}

EvalRow evaluate_units(const std::string& system, const std::vector<EvalUnit>& units) {
    if (units.empty()) throw ValidationError("metrics: no units to evaluate");
    EvalRow row;
    row.system = system;
    std::vector<std::string> outputs;
    std::vector<std::vector<std::string>> refs;
    std::string all_output;
    double tok_sum = 0.0, sent_sum = 0.0;
    for (const auto& u : units) {
        const SariScore s = sari(u.source, u.output, u.refs);
        row.sari.sari += s.sari;
        row.sari.add += s.add;
        row.sari.keep += s.keep;
        row.sari.del += s.del;
        for (size_t k = 0; k < 4; ++k) {
            row.sari.add_n[k] += s.add_n[k];
            row.sari.keep_n[k] += s.keep_n[k];
            row.sari.del_n[k] += s.del_n[k];
        }
        outputs.push_back(u.output);
        refs.push_back(u.refs);
        if (!Tokenizer::split_ws(u.output).empty()) {
            if (!all_output.empty()) all_output.push_back(' ');
            all_output += u.output;
        }
        const auto st = length_stats(resegment(u.output));
        tok_sum += static_cast<double>(st.tokens);
        sent_sum += static_cast<double>(st.sentences);
    }
    const double n = static_cast<double>(units.size());
    row.sari.sari /= n;
    row.sari.add /= n;
    row.sari.keep /= n;
    row.sari.del /= n;
    for (size_t k = 0; k < 4; ++k) {
        row.sari.add_n[k] /= n;
        row.sari.keep_n[k] /= n;
        row.sari.del_n[k] /= n;
    }
    row.bleu = corpus_bleu(outputs, refs);
    row.fkgl = all_output.empty() ? std::nan("") : fkgl(all_output);
    row.tok = tok_sum / n;
    row.sent = sent_sum / n;
    return row;
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
    std::set<std::string> extra;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.external) extra.insert(k);
    std::ostringstream out;
    out << "system,sari,add,keep,delete,fkgl,bleu,tok,sent,ms_per_sentence";
    for (const auto& k : extra) out << ',' << k;
    out << '\n';
    char buf[64];
    auto num = [&out, &buf](double v, const char* fmt) {
        std::snprintf(buf, sizeof buf, fmt, v);
        out << ',' << buf;
    };
    for (const auto& r : rows) {
        out << r.system;
        num(r.sari.sari, "%.2f");
        num(r.sari.add, "%.2f");
        num(r.sari.keep, "%.2f");
        num(r.sari.del, "%.2f");
        if (std::isnan(r.fkgl))
            out << ",nan";
        else
            num(r.fkgl, "%.2f");
        num(r.bleu, "%.2f");
        num(r.tok, "%.2f");
        num(r.sent, "%.2f");
        if (r.ms_per_sentence < 0)
            out << ',';
        else
            num(r.ms_per_sentence, "%.3f");
        for (const auto& k : extra) {
            auto it = r.external.find(k);
            if (it == r.external.end())
                out << ',';
            else
                num(it->second, "%.4f");
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace docsimp
