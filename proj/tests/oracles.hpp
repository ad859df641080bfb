#pragma once

// Brute-force metric oracles, written before and kept independent of the
// library implementations in src/metrics.cpp. They favor obviousness over
// speed: n-gram multisets are std::map<vector<string>, double> and every
// formula is spelled out. Tests freeze library behavior against these.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            flush();
        } else if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else {
            flush();
            out.push_back(std::string(1, c));
        }
    }
    flush();
    return out;
}

using Gram = std::vector<std::string>;
using Bag = std::map<Gram, double>;

inline Bag ngrams(const std::vector<std::string>& toks, int n) {
    Bag bag;
    if (static_cast<int>(toks.size()) < n) return bag;
    for (size_t i = 0; i + n <= toks.size(); ++i)
        bag[Gram(toks.begin() + i, toks.begin() + i + n)] += 1.0;
    return bag;
}

inline double total(const Bag& b) {
    double t = 0.0;
    for (const auto& [g, c] : b) t += c;
    return t;
}

inline Bag minus(const Bag& a, const Bag& b) {
    Bag out;
    for (const auto& [g, c] : a) {
        auto it = b.find(g);
        double d = c - (it == b.end() ? 0.0 : it->second);
        if (d > 0.0) out[g] = d;
    }
    return out;
}

inline Bag intersect(const Bag& a, const Bag& b) {
    Bag out;
    for (const auto& [g, c] : a) {
        auto it = b.find(g);
        if (it != b.end()) {
            double m = std::min(c, it->second);
            if (m > 0.0) out[g] = m;
        }
    }
    return out;
}

struct SariParts {
    double sari = 0.0, add = 0.0, keep = 0.0, del = 0.0;
};

// Conventions (frozen, shared with the library implementation):
//   add    F1 of output n-grams absent from the source, against n-grams
//          present in at least one reference but absent from the source
//          (per-gram gold count = max over references of count beyond source).
//   keep   F1 of n-grams kept by the system (min(src, out)) against the
//          reference-fraction-weighted kept counts (mean over references of
//          min(src, ref)).
//   delete precision of n-grams removed by the system (src - out) against
//          the mean over references of (src - ref).
// Each component is macro-averaged over n = 1..4. At a given n, when both
// the output-side and reference-side candidate sets are empty the score is
// 1; any 0/0 elsewhere scores 0. Scores are scaled to 0..100.
inline SariParts sari(const std::string& source, const std::string& output,
                      const std::vector<std::string>& refs) {
    auto stoks = tokenize(source);
    auto otoks = tokenize(output);
    std::vector<std::vector<std::string>> rtoks;
    for (const auto& r : refs) rtoks.push_back(tokenize(r));
    const double K = static_cast<double>(refs.size());

    SariParts parts;
    for (int n = 1; n <= 4; ++n) {
        Bag S = ngrams(stoks, n);
        Bag O = ngrams(otoks, n);

        // --- add ---
        Bag addO = minus(O, S);
        Bag addR;
        for (const auto& rt : rtoks) {
            Bag extra = minus(ngrams(rt, n), S);
            for (const auto& [g, c] : extra)
                addR[g] = std::max(addR[g], c);
        }
        double add_n;
        if (total(addO) == 0.0 && total(addR) == 0.0) {
            add_n = 1.0;
        } else {
            double hit = total(intersect(addO, addR));
            double p = total(addO) > 0.0 ? hit / total(addO) : 0.0;
            double r = total(addR) > 0.0 ? hit / total(addR) : 0.0;
            add_n = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        }

        // --- keep ---
        Bag keepO = intersect(S, O);
        Bag keepR;
        for (const auto& rt : rtoks) {
            Bag kept = intersect(S, ngrams(rt, n));
            for (const auto& [g, c] : kept) keepR[g] += c / K;
        }
        double keep_n;
        if (total(keepO) == 0.0 && total(keepR) == 0.0) {
            keep_n = 1.0;
        } else {
            double hit = total(intersect(keepO, keepR));
            double p = total(keepO) > 0.0 ? hit / total(keepO) : 0.0;
            double r = total(keepR) > 0.0 ? hit / total(keepR) : 0.0;
            keep_n = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        }

        // --- delete ---
        Bag delO = minus(S, O);
        Bag delR;
        for (const auto& rt : rtoks) {
            Bag gone = minus(S, ngrams(rt, n));
            for (const auto& [g, c] : gone) delR[g] += c / K;
        }
        double del_n;
        if (total(delO) == 0.0 && total(delR) == 0.0)
            del_n = 1.0;
        else
            del_n = total(delO) > 0.0 ? total(intersect(delO, delR)) / total(delO) : 0.0;

        parts.add += add_n / 4.0;
        parts.keep += keep_n / 4.0;
        parts.del += del_n / 4.0;
    }
    parts.add *= 100.0;
    parts.keep *= 100.0;
    parts.del *= 100.0;
    parts.sari = (parts.add + parts.keep + parts.del) / 3.0;
    return parts;
}

// Corpus BLEU, 4-gram, no smoothing. Modified precision clips by the max
// count over references; brevity penalty uses the closest reference length
// (ties to the shorter). Any empty n-gram precision zeroes the score.
inline double bleu(const std::vector<std::string>& outputs,
                   const std::vector<std::vector<std::string>>& refs) {
    double match[5] = {0}, totaln[5] = {0};
    double cand_len = 0.0, ref_len = 0.0;
    for (size_t i = 0; i < outputs.size(); ++i) {
        auto otoks = tokenize(outputs[i]);
        std::vector<std::vector<std::string>> rtoks;
        for (const auto& r : refs[i]) rtoks.push_back(tokenize(r));
        cand_len += static_cast<double>(otoks.size());
        long best = -1;
        for (const auto& rt : rtoks) {
            long len = static_cast<long>(rt.size());
            if (best < 0 ||
                std::abs(len - (long)otoks.size()) < std::abs(best - (long)otoks.size()) ||
                (std::abs(len - (long)otoks.size()) == std::abs(best - (long)otoks.size()) &&
                 len < best))
                best = len;
        }
        ref_len += static_cast<double>(best < 0 ? 0 : best);
        for (int n = 1; n <= 4; ++n) {
            Bag O = ngrams(otoks, n);
            Bag clip;
            for (const auto& rt : rtoks) {
                Bag R = ngrams(rt, n);
                for (const auto& [g, c] : R) clip[g] = std::max(clip[g], c);
            }
            totaln[n] += total(O);
            match[n] += total(intersect(O, clip));
        }
    }
    double logsum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        if (totaln[n] <= 0.0 || match[n] <= 0.0) return 0.0;
        logsum += std::log(match[n] / totaln[n]) / 4.0;
    }
    double bp = cand_len >= ref_len ? 1.0
                                    : std::exp(1.0 - ref_len / std::max(cand_len, 1e-12));
    return 100.0 * bp * std::exp(logsum);
}

}  // namespace oracle
