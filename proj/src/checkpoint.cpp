#include "docsimp/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "docsimp/errors.hpp"

namespace docsimp {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ValidationError("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
    const uint32_t n = get_u32(is);
    if (n > (1u << 20)) throw ValidationError("checkpoint: implausible string length");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw ValidationError("checkpoint: truncated file");
    return s;
}

void put_f32(std::ostream& os, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

float get_f32(std::istream& is) {
    const uint32_t v = get_u32(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointData& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(ck.config.size()));
    for (const auto& [k, v] : ck.config) {
        put_str(os, k);
        put_str(os, v);
    }
    put_u32(os, static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& [name, m] : ck.tensors) {
        put_str(os, name);
        put_u32(os, static_cast<uint32_t>(m.rows));
        put_u32(os, static_cast<uint32_t>(m.cols));
        for (float f : m.a) put_f32(os, f);
    }
    if (!os) throw ValidationError("checkpoint: write to '" + path + "' failed");
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError("checkpoint: '" + path + "' is not a model checkpoint");
    const uint32_t version = get_u32(is);
    if (version != kVersion)
        throw ValidationError("checkpoint: unsupported format version " +
                              std::to_string(version));
    CheckpointData ck;
    const uint32_t n_kv = get_u32(is);
    for (uint32_t i = 0; i < n_kv; ++i) {
        std::string k = get_str(is);
        std::string v = get_str(is);
        ck.config[std::move(k)] = std::move(v);
    }
    const uint32_t n_tensors = get_u32(is);
    for (uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = get_str(is);
        const uint32_t rows = get_u32(is);
        const uint32_t cols = get_u32(is);
        if (rows == 0 || cols == 0 || static_cast<uint64_t>(rows) * cols > (1ull << 28))
            throw ValidationError("checkpoint: implausible tensor shape for '" + name + "'");
        Mat<float> m(static_cast<int>(rows), static_cast<int>(cols));
        for (auto& f : m.a) f = get_f32(is);
        ck.tensors.emplace_back(std::move(name), std::move(m));
    }
    return ck;
}

void load_params(const CheckpointData& ck, const std::vector<Param<float>*>& params) {
    std::map<std::string, const Mat<float>*> by_name;
    for (const auto& [name, m] : ck.tensors) {
        if (!by_name.emplace(name, &m).second)
            throw ValidationError("checkpoint: duplicate tensor '" + name + "'");
    }
    std::map<std::string, bool> used;
    for (Param<float>* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end())
            throw ValidationError("checkpoint: missing tensor '" + p->name + "'");
        const Mat<float>& m = *it->second;
        if (m.rows != p->value.rows || m.cols != p->value.cols)
            throw ValidationError("checkpoint: shape mismatch for '" + p->name + "'");
        p->value = m;
        used[p->name] = true;
    }
    for (const auto& [name, m] : ck.tensors)
        if (!used.count(name))
            throw ValidationError("checkpoint: unexpected tensor '" + name + "'");
}

namespace {

std::map<std::string, std::string> ctx_kv(const ContextEncoderConfig& c) {
    return {
        {"ctx_d_ctx", std::to_string(c.d_ctx)},
        {"ctx_radius", std::to_string(c.radius)},
        {"ctx_flag_embedding", c.flag_embedding ? "1" : "0"},
        {"ctx_vocab_size", std::to_string(c.vocab_size)},
        {"ctx_vocab_hash", std::to_string(c.vocab_hash)},
        {"ctx_seed", std::to_string(c.seed)},
    };
}

const std::string& kv_get(const std::map<std::string, std::string>& kv, const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ValidationError("checkpoint: missing config key '" + k + "'");
    return it->second;
}

ContextEncoderConfig ctx_from_kv(const std::map<std::string, std::string>& kv) {
    ContextEncoderConfig c;
    c.d_ctx = std::stoi(kv_get(kv, "ctx_d_ctx"));
    c.radius = std::stoi(kv_get(kv, "ctx_radius"));
    c.flag_embedding = kv_get(kv, "ctx_flag_embedding") == "1";
    c.vocab_size = std::stoi(kv_get(kv, "ctx_vocab_size"));
    c.vocab_hash = std::stoull(kv_get(kv, "ctx_vocab_hash"));
    c.seed = std::stoull(kv_get(kv, "ctx_seed"));
    return c;
}

std::vector<std::pair<std::string, Mat<float>>> tensors_of(
    const std::vector<Param<float>*>& params) {
    std::vector<std::pair<std::string, Mat<float>>> out;
    out.reserve(params.size());
    for (const Param<float>* p : params) out.emplace_back(p->name, p->value);
    return out;
}

void check_vocab(const std::map<std::string, std::string>& kv, const Tokenizer& tok,
                 const std::string& size_key, const std::string& hash_key) {
    if (std::stoi(kv_get(kv, size_key)) != tok.vocab_size())
        throw ValidationError("checkpoint: vocabulary size mismatch with the given vocab");
    if (std::stoull(kv_get(kv, hash_key)) != tok.vocab_hash())
        throw ValidationError("checkpoint: vocabulary hash mismatch with the given vocab");
}

}  // namespace

void save_simplifier(const std::string& path, Seq2SeqModel& model, ContextEncoder* ctx,
                     TrainMode mode, Granularity granularity) {
    if (model.config().context_attention != (ctx != nullptr))
        throw ValidationError("checkpoint: context encoder presence mismatch");
    CheckpointData ck;
    ck.config = model.config().to_kv();
    ck.config["kind"] = "simplifier";
    ck.config["train_mode"] = train_mode_name(mode);
    ck.config["granularity"] = granularity_name(granularity);
    ck.tensors = tensors_of(model.params().params());
    if (ctx != nullptr) {
        if (ctx->config().d_ctx != model.config().d_ctx)
            throw ValidationError("checkpoint: context width disagrees with the model");
        for (const auto& [k, v] : ctx_kv(ctx->config())) ck.config[k] = v;
        auto extra = tensors_of(ctx->params().params());
        ck.tensors.insert(ck.tensors.end(), extra.begin(), extra.end());
    }
    write_checkpoint(path, ck);
}

LoadedSimplifier load_simplifier(const std::string& path, const Tokenizer& tok) {
    const CheckpointData ck = read_checkpoint(path);
    if (kv_get(ck.config, "kind") != "simplifier")
        throw ValidationError("checkpoint: '" + path + "' is not a simplifier model");
    check_vocab(ck.config, tok, "vocab_size", "vocab_hash");
    LoadedSimplifier out;
    out.mode = train_mode_from_name(kv_get(ck.config, "train_mode"));
    out.granularity = granularity_from_name(kv_get(ck.config, "granularity"));
    const ModelConfig cfg = ModelConfig::from_kv(ck.config);
    out.model = std::make_unique<Seq2SeqModel>(cfg);
    std::vector<Param<float>*> params = out.model->params().params();
    if (cfg.context_attention) {
        out.ctx = std::make_unique<ContextEncoder>(ctx_from_kv(ck.config), tok);
        const auto& extra = out.ctx->params().params();
        params.insert(params.end(), extra.begin(), extra.end());
    }
    load_params(ck, params);
    return out;
}

void save_planner(const std::string& path, Planner& planner) {
    CheckpointData ck;
    ck.config = planner.config().to_kv();
    ck.config["kind"] = "planner";
    ck.tensors = tensors_of(planner.all_params());
    write_checkpoint(path, ck);
}

std::unique_ptr<Planner> load_planner(const std::string& path, const Tokenizer& tok) {
    const CheckpointData ck = read_checkpoint(path);
    if (kv_get(ck.config, "kind") != "planner")
        throw ValidationError("checkpoint: '" + path + "' is not a planner model");
    check_vocab(ck.config, tok, "vocab_size", "vocab_hash");
    auto planner = std::make_unique<Planner>(PlannerConfig::from_kv(ck.config), tok);
    load_params(ck, planner->all_params());
    return planner;
}

}  // namespace docsimp
