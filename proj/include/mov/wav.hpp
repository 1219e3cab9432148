#pragma once

#include <string>
#include <vector>

namespace mov {

struct Waveform {
    int sample_rate = 0;
    int channels = 1;
    std::vector<double> samples;  // interleaved when channels > 1, range [-1,1]

    std::size_t frame_count() const {
        return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
    }
};

// Minimal RIFF/WAVE with 16-bit little-endian PCM.
Waveform load_wav(const std::string& path);
void save_wav(const std::string& path, const Waveform& w);

Waveform resample_to_16k_mono(const Waveform& raw);

}  // namespace mov
