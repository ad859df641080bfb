#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "docsimp/context.hpp"
#include "docsimp/mat.hpp"
#include "docsimp/planner.hpp"
#include "docsimp/seq2seq.hpp"
#include "docsimp/tokenizer.hpp"
#include "docsimp/trainer.hpp"

namespace docsimp {

// On-disk model format: magic "DSCK", u32 version, string key/value config,
// then named float32 tensors, all little-endian. Values are stored exactly,
// so a save/load round trip is bit-identical.
struct CheckpointData {
    std::map<std::string, std::string> config;
    std::vector<std::pair<std::string, Mat<float>>> tensors;
};

void write_checkpoint(const std::string& path, const CheckpointData& ck);
CheckpointData read_checkpoint(const std::string& path);

// Copies tensors into params by name; every param must be present with the
// right shape and no tensor may be left over.
void load_params(const CheckpointData& ck, const std::vector<Param<float>*>& params);

struct LoadedSimplifier {
    std::unique_ptr<Seq2SeqModel> model;
    std::unique_ptr<ContextEncoder> ctx;  // non-null iff the model wants context windows
    TrainMode mode = TrainMode::plain;    // input layout the model was trained with
    Granularity granularity = Granularity::sentence;  // unit size it was trained on
};

// ctx must be non-null exactly when the model has context attention.
void save_simplifier(const std::string& path, Seq2SeqModel& model, ContextEncoder* ctx,
                     TrainMode mode, Granularity granularity);
LoadedSimplifier load_simplifier(const std::string& path, const Tokenizer& tok);

void save_planner(const std::string& path, Planner& planner);
std::unique_ptr<Planner> load_planner(const std::string& path, const Tokenizer& tok);

}  // namespace docsimp
