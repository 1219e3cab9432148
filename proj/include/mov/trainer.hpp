#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mov/model.hpp"
#include "mov/params.hpp"

namespace mov {

// Base-class fine-tuning: the video and text towers stay frozen, the
// auxiliary tower trains through its last k blocks, the temporal and fusion
// heads train from scratch.
struct TrainConfig {
    double alpha = 0.5;  // weight of the video term in the loss
    double tau = 0.01;   // training temperature
    int batch_size = 32;
    int epochs = 50;
    double base_lr = 1e-4;
    double weight_decay = 0.05;
    std::string trainable_layers = "all";  // block count from the top, or "all"
    std::uint64_t seed = 0;

    void validate() const;
};

// "all" keeps every auxiliary parameter trainable; a number k selects the
// last k transformer blocks. Resolution fails when k exceeds the tower depth.
int resolve_trainable_layers(const std::string& value, int depth);

// Explicit trainable/frozen assignment for every parameter in the set.
struct FreezePlan {
    std::map<std::string, bool> trainable;
};

FreezePlan build_freeze_plan(const ParamSet& ps, const ModelConfig& mc,
                             const std::string& trainable_layers);
void apply_freeze_plan(ParamSet& ps, const FreezePlan& plan);

// One preprocessed training clip. The backbone features are computed once
// up front because the video tower never moves during fine-tuning.
struct TrainSample {
    SampleView view;
    Tensor video_tokens;  // [frames, d]
    int label = 0;
};

std::vector<TrainSample> prepare_train_samples(ParamSet& ps, const ModelConfig& mc,
                                               const std::vector<SampleView>& views,
                                               const std::vector<int>& labels);

// Forward-only loss of one sample: alpha-weighted cross entropy of the two
// fused features against the class table at temperature tau.
double mov_loss(const Tensor& v_m, const Tensor& x_m, const Tensor& class_embeddings,
                int label, double alpha, double tau);

// Tape-side counterpart used by the training step.
Var mov_loss_graph(Graph& g, Var v_m, Var x_m, const Tensor& class_embeddings, int label,
                   double alpha, double tau);

struct StepRecord {
    long step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<StepRecord> curve;
};

// Fine-tunes on the base split with AdamW under a half-cosine schedule.
// Shuffling, batching and reduction order are fixed functions of the seed,
// so identical inputs give bitwise identical parameters. Throws logic_error
// if a frozen parameter changed by the end of training.
TrainResult train_base(ParamSet& ps, const ModelConfig& mc, const TrainConfig& tc,
                       const std::vector<TrainSample>& samples, const Tensor& class_embeddings);

// Backbone pretraining stand-in: aligns per-frame video class tokens with
// the (frozen, randomly initialized) text tower's class embeddings so the
// towers share an embedding space before fine-tuning.
struct AlignConfig {
    double tau = 0.01;
    int batch_size = 32;
    int epochs = 20;
    double base_lr = 1e-3;
    double weight_decay = 0.05;
    int frames_per_clip = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

TrainResult train_alignment(ParamSet& ps, const ModelConfig& mc, const AlignConfig& ac,
                            const std::vector<SampleView>& views, const std::vector<int>& labels,
                            const Tensor& class_embeddings);

// Checkpoint directory: parameters, config snapshot, loss curve.
void save_checkpoint(const std::string& dir, const ParamSet& ps, const ModelConfig& mc,
                     const TrainConfig& tc, const std::vector<StepRecord>& curve);

struct Checkpoint {
    ParamSet params;
    ModelConfig model;
    TrainConfig train;
    std::vector<StepRecord> curve;
};

Checkpoint load_checkpoint(const std::string& dir);

}  // namespace mov
