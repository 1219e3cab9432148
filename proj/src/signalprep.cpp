#include "mov/signalprep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mov/fft.hpp"
#include "mov/image.hpp"

namespace mov {

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters [mel_bins, n_fft_bins] for a given FFT resolution.
Tensor mel_filter_bank(int mel_bins, int n_fft_bins, double sample_rate, double f_lo,
                       double f_hi) {
    int n_fft = (n_fft_bins - 1) * 2;
    double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
    std::vector<double> edges(static_cast<std::size_t>(mel_bins + 2));
    for (int i = 0; i < mel_bins + 2; ++i) {
        edges[static_cast<std::size_t>(i)] =
            mel_to_hz(m_lo + (m_hi - m_lo) * i / (mel_bins + 1));
    }
    Tensor bank({mel_bins, n_fft_bins});
    for (int m = 0; m < mel_bins; ++m) {
        double left = edges[static_cast<std::size_t>(m)];
        double center = edges[static_cast<std::size_t>(m + 1)];
        double right = edges[static_cast<std::size_t>(m + 2)];
        for (int k = 0; k < n_fft_bins; ++k) {
            double f = sample_rate * k / n_fft;
            double wgt = 0.0;
            if (f > left && f < right) {
                wgt = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
            }
            bank.at(m, k) = wgt;
        }
    }
    return bank;
}

int reflect_index(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

}  // namespace

std::vector<double> mel_center_frequencies(int mel_bins, double f_lo, double f_hi) {
    if (mel_bins <= 0) throw std::invalid_argument("mel_bins must be positive");
    double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
    std::vector<double> centers(static_cast<std::size_t>(mel_bins));
    for (int m = 0; m < mel_bins; ++m) {
        centers[static_cast<std::size_t>(m)] =
            mel_to_hz(m_lo + (m_hi - m_lo) * (m + 1) / (mel_bins + 1));
    }
    return centers;
}

Tensor log_mel_spectrogram(const Waveform& w, int mel_bins, int window, int hop) {
    if (w.sample_rate != 16000 || w.channels != 1) {
        throw std::invalid_argument("spectrogram input must be 16 kHz mono");
    }
    int n = static_cast<int>(w.samples.size());
    if (n < window) {
        throw std::invalid_argument("audio shorter than one analysis window");
    }
    if (mel_bins <= 0 || window <= 1 || hop <= 0) {
        throw std::invalid_argument("bad spectrogram geometry");
    }
    int frames = (n + hop - 1) / hop;
    int pad = window / 2;
    Tensor win = hamming_window(window);
    int n_fft_bins = next_pow2(window) / 2 + 1;
    Tensor bank = mel_filter_bank(mel_bins, n_fft_bins, 16000.0, 0.0, 8000.0);
    Tensor out({mel_bins, frames});
    Tensor frame({window});
    for (int t = 0; t < frames; ++t) {
        for (int k = 0; k < window; ++k) {
            frame.at(k) = w.samples[static_cast<std::size_t>(
                reflect_index(t * hop - pad + k, n))];
        }
        Tensor power = rfft_magnitude(frame, win);
        for (int m = 0; m < mel_bins; ++m) {
            double acc = 0.0;
            for (int k = 0; k < n_fft_bins; ++k) acc += bank.at(m, k) * power.at(k);
            out.at(m, t) = std::log(std::max(acc, 1e-10));
        }
    }
    return out;
}

Tensor normalize_spectrogram(const Tensor& s) {
    if (s.rank() != 2) throw std::invalid_argument("spectrogram must be rank 2");
    double mean = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) mean += s.data()[i];
    mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double c = s.data()[i] - mean;
        var += c * c;
    }
    var /= static_cast<double>(s.size());
    Tensor out(s.shape());
    if (var <= 0.0) return out;
    double inv = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < s.size(); ++i) out.data()[i] = (s.data()[i] - mean) * inv;
    return out;
}

Tensor crop_and_augment_spectrogram(const Tensor& s, std::uint64_t seed, int crop_frames,
                                    int time_mask_max, int freq_mask_max) {
    if (s.rank() != 2) throw std::invalid_argument("spectrogram must be rank 2");
    int mel = s.extent(0), frames = s.extent(1);
    if (frames < crop_frames) {
        throw std::invalid_argument("spectrogram shorter than the crop length");
    }
    Rng rng(seed);
    int offset = static_cast<int>(rng.integer(static_cast<std::uint64_t>(frames - crop_frames + 1)));
    Tensor out({mel, crop_frames});
    for (int m = 0; m < mel; ++m)
        for (int t = 0; t < crop_frames; ++t) out.at(m, t) = s.at(m, offset + t);
    int t_max = std::min(time_mask_max, crop_frames);
    int f_max = std::min(freq_mask_max, mel);
    int t_width = static_cast<int>(rng.integer(static_cast<std::uint64_t>(t_max + 1)));
    int t_start = static_cast<int>(rng.integer(static_cast<std::uint64_t>(crop_frames - t_width + 1)));
    int f_width = static_cast<int>(rng.integer(static_cast<std::uint64_t>(f_max + 1)));
    int f_start = static_cast<int>(rng.integer(static_cast<std::uint64_t>(mel - f_width + 1)));
    for (int m = 0; m < mel; ++m)
        for (int t = t_start; t < t_start + t_width; ++t) out.at(m, t) = 0.0;
    for (int m = f_start; m < f_start + f_width; ++m)
        for (int t = 0; t < crop_frames; ++t) out.at(m, t) = 0.0;
    return out;
}

Tensor expand_three_channels(const Tensor& s) {
    if (s.rank() != 2) throw std::invalid_argument("spectrogram must be rank 2");
    int mel = s.extent(0), frames = s.extent(1);
    Tensor out({3, mel, frames});
    for (int c = 0; c < 3; ++c)
        for (int m = 0; m < mel; ++m)
            for (int t = 0; t < frames; ++t) out.at(c, m, t) = s.at(m, t);
    return out;
}

std::vector<int> frame_indices_from(int start, int video_len, int n, int stride) {
    if (video_len < 1) throw std::invalid_argument("empty video");
    if (n < 1 || stride < 1 || start < 0) throw std::invalid_argument("bad sampling geometry");
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        idx[static_cast<std::size_t>(k)] = std::min(start + k * stride, video_len - 1);
    }
    return idx;
}

std::vector<int> sample_frame_indices(int video_len, int n, int stride, Rng& rng) {
    if (video_len < 1) throw std::invalid_argument("empty video");
    int span = (n - 1) * stride + 1;
    int hi = std::max(0, video_len - span);
    int start = static_cast<int>(rng.integer(static_cast<std::uint64_t>(hi + 1)));
    return frame_indices_from(start, video_len, n, stride);
}

SpatialAug draw_spatial_aug(Rng& rng, bool allow_flip) {
    SpatialAug aug;
    aug.hflip = allow_flip && rng.uniform() < 0.5;
    return aug;
}

Tensor apply_spatial_aug(const Tensor& image, const SpatialAug& aug) {
    return aug.hflip ? hflip_image(image) : image;
}

}  // namespace mov
