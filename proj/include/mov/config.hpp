#pragma once

#include <cstdint>
#include <string>

#include "mov/evaluator.hpp"
#include "mov/model.hpp"
#include "mov/synthdata.hpp"
#include "mov/trainer.hpp"

namespace mov {

// One document that fully determines a run: dataset generation, model
// geometry, both training phases and inference settings. Serialized as a
// sectioned key=value file; a copy of the effective config lands in every
// output directory.
struct RunConfig {
    std::uint64_t seed = 7;
    std::string out = "run";
    int jobs = 1;
    GenerateConfig data;
    ModelConfig model;
    AlignConfig align;
    TrainConfig train;
    InferenceConfig infer;

    void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);
void save_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace mov
