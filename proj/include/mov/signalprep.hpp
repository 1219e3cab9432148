#pragma once

#include <vector>

#include "mov/rng.hpp"
#include "mov/tensor.hpp"
#include "mov/wav.hpp"

namespace mov {

// Spectrograms are [mel_bins, frames] tensors.

std::vector<double> mel_center_frequencies(int mel_bins, double f_lo, double f_hi);

// Requires 16 kHz mono input at least one window long. Window 25 ms (400
// samples), hop 10 ms (160), Hamming, power spectrum through a triangular
// mel bank over 0-8 kHz, natural log with floor 1e-10. Center (reflect)
// padding gives frames = ceil(samples/hop).
Tensor log_mel_spectrogram(const Waveform& w, int mel_bins = 128, int window = 400,
                           int hop = 160);

// Global mean 0 / std 1; a constant input maps to all zeros.
Tensor normalize_spectrogram(const Tensor& s);

// Random contiguous time crop to crop_frames, then one time mask of width
// uniform in [0, time_mask_max] and one frequency mask of width uniform in
// [0, freq_mask_max], masked cells zeroed. Pure function of (s, seed).
Tensor crop_and_augment_spectrogram(const Tensor& s, std::uint64_t seed, int crop_frames = 800,
                                    int time_mask_max = 192, int freq_mask_max = 48);

Tensor expand_three_channels(const Tensor& s);  // [M,T] -> [3,M,T]

// start + k*stride for k < n, clamped to the final frame.
std::vector<int> frame_indices_from(int start, int video_len, int n, int stride);

// Random start uniform over positions where the strided span still fits
// (start 0 when the video is shorter than the span).
std::vector<int> sample_frame_indices(int video_len, int n, int stride, Rng& rng);

// Spatial augmentation parameters drawn once per clip and shared by every
// frame of that clip.
struct SpatialAug {
    bool hflip = false;
};

SpatialAug draw_spatial_aug(Rng& rng, bool allow_flip);
Tensor apply_spatial_aug(const Tensor& image, const SpatialAug& aug);

}  // namespace mov
