#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mov/model.hpp"
#include "mov/synthdata.hpp"
#include "mov/wav.hpp"

namespace mov {

// Media decoding and view construction. Training views are seeded random
// (frame window, horizontal flip, spectrogram crop and masking); evaluation
// views are deterministic, with temporal starts spread evenly and no
// stochastic augmentation.

std::vector<Tensor> load_record_frames(const std::string& data_root, const ManifestRecord& r);
Waveform load_record_audio(const std::string& data_root, const ManifestRecord& r);

SampleView build_train_view(const std::string& data_root, const ManifestRecord& r,
                            const ModelConfig& mc, std::uint64_t seed);
std::vector<SampleView> build_eval_views(const std::string& data_root, const ManifestRecord& r,
                                         const ModelConfig& mc, int n_views);

// On-disk cache of preprocessed views so training and every ablation sweep
// share one preprocessing pass. The cache records its settings and loaders
// refuse a cache built under different ones.
void preprocess_manifest(const DatasetManifest& m, const std::string& data_root,
                         const ModelConfig& mc, int eval_views, std::uint64_t seed,
                         const std::string& cache_dir, int jobs = 1);
void verify_cache(const std::string& cache_dir, const ModelConfig& mc, int eval_views,
                  std::uint64_t seed);
SampleView load_train_view(const std::string& cache_dir, const ModelConfig& mc,
                           const std::string& id);
std::vector<SampleView> load_eval_views(const std::string& cache_dir, const ModelConfig& mc,
                                        const std::string& id, int n_views);

}  // namespace mov
