#include "docsimp/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "docsimp/errors.hpp"
#include "docsimp/rng.hpp"

namespace docsimp {

const char* op_name(Op op) {
    switch (op) {
        case Op::copy: return "copy";
        case Op::rephrase: return "rephrase";
        case Op::split: return "split";
        case Op::del: return "delete";
    }
    throw std::invalid_argument("op_name: bad op");
}

Op op_from_name(const std::string& s) {
    if (s == "copy") return Op::copy;
    if (s == "rephrase") return Op::rephrase;
    if (s == "split") return Op::split;
    if (s == "delete") return Op::del;
    throw ValidationError("corpus: unknown operation name '" + s + "'");
}

Tokenizer Tokenizer::from_words(std::vector<std::string> words) {
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    Tokenizer t;
    t.words_ = std::move(words);
    for (size_t i = 0; i < t.words_.size(); ++i) {
        if (t.words_[i].empty())
            throw ValidationError("tokenizer: empty word in vocabulary");
        t.index_[t.words_[i]] = kNumSpecials + static_cast<int>(i);
    }
    return t;
}

Tokenizer Tokenizer::load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("tokenizer: cannot open vocab file " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) words.push_back(line);
    return from_words(std::move(words));
}

void Tokenizer::save_vocab(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("tokenizer: cannot write vocab file " + path);
    for (const auto& w : words_) out << w << '\n';
}

uint64_t Tokenizer::vocab_hash() const {
    uint64_t h = 1469598103934665603ull;
    for (const auto& w : words_) {
        h = fnv1a_str(w, h);
        h = fnv1a("\n", 1, h);
    }
    return h;
}

int Tokenizer::rl_id(int level) {
    if (level < 0 || level > 4)
        throw ValidationError("tokenizer: reading level out of range 0..4");
    return kRl0 + level;
}

int Tokenizer::op_id(Op op) { return kOpCopy + static_cast<int>(op); }

Op Tokenizer::op_from_id(int id) {
    if (!is_op_id(id)) throw std::invalid_argument("tokenizer: not an op id");
    return static_cast<Op>(id - kOpCopy);
}

std::vector<std::string> Tokenizer::split_ws(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string Tokenizer::normalize_ws(const std::string& text) {
    auto toks = split_ws(text);
    std::string out;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) out.push_back(' ');
        out += toks[i];
    }
    return out;
}

std::vector<int> Tokenizer::encode_body(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& tok : split_ws(text)) {
        auto it = index_.find(tok);
        ids.push_back(it == index_.end() ? kUnk : it->second);
    }
    return ids;
}

std::vector<int> Tokenizer::tokenize(const std::string& text, std::optional<int> level,
                                     std::optional<Op> op, int max_len) const {
    return tokenize_unit(text, level, op ? std::vector<Op>{*op} : std::vector<Op>{}, max_len);
}

std::vector<int> Tokenizer::tokenize_unit(const std::string& text, std::optional<int> level,
                                          const std::vector<Op>& ops, int max_len) const {
    std::vector<int> ids;
    for (Op op : ops) ids.push_back(op_id(op));
    if (level) ids.push_back(rl_id(*level));
    ids.push_back(kBos);
    for (int id : encode_body(text)) ids.push_back(id);
    ids.push_back(kEos);
    if (static_cast<int>(ids.size()) > max_len)
        throw ValidationError("tokenizer: input of " + std::to_string(ids.size()) +
                              " tokens exceeds max_len " + std::to_string(max_len));
    return ids;
}

std::string Tokenizer::detokenize(const std::vector<int>& ids) const {
    std::string out;
    auto append = [&out](const std::string& s) {
        if (!out.empty()) out.push_back(' ');
        out += s;
    };
    for (int id : ids) {
        if (id == kUnk) {
            append("<unk>");
        } else if (is_op_id(id)) {
            append(std::string("<") + op_name(op_from_id(id)) + ">");
        } else if (id >= kNumSpecials) {
            append(word(id));
        }
        // PAD/BOS/EOS/SEP/RL are structural; dropped.
    }
    return out;
}

const std::string& Tokenizer::word(int id) const {
    int i = id - kNumSpecials;
    if (i < 0 || i >= static_cast<int>(words_.size()))
        throw std::out_of_range("tokenizer: word id out of range");
    return words_[static_cast<size_t>(i)];
}

}  // namespace docsimp
