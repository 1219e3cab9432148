#include "mov/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "mov/bytes.hpp"

namespace mov {

namespace {

std::uint16_t get_u16_le(std::FILE* f) {
    unsigned char b[2];
    if (std::fread(b, 1, 2, f) != 2) throw std::runtime_error("wav: truncated");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void put_u16_le(std::FILE* f, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    std::fwrite(b, 1, 2, f);
}

}  // namespace

Waveform load_wav(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("wav: cannot open: " + path);
    try {
        char tag[4];
        if (std::fread(tag, 1, 4, f) != 4 || std::memcmp(tag, "RIFF", 4) != 0) {
            throw std::runtime_error("wav: not RIFF: " + path);
        }
        bytes::get_u32_le(f);  // RIFF size, unused
        if (std::fread(tag, 1, 4, f) != 4 || std::memcmp(tag, "WAVE", 4) != 0) {
            throw std::runtime_error("wav: not WAVE: " + path);
        }
        Waveform w;
        int bits = 0;
        bool have_fmt = false;
        while (std::fread(tag, 1, 4, f) == 4) {
            std::uint32_t chunk_size = bytes::get_u32_le(f);
            if (std::memcmp(tag, "fmt ", 4) == 0) {
                std::uint16_t format = get_u16_le(f);
                w.channels = get_u16_le(f);
                w.sample_rate = static_cast<int>(bytes::get_u32_le(f));
                bytes::get_u32_le(f);  // byte rate
                get_u16_le(f);         // block align
                bits = get_u16_le(f);
                if (format != 1 || bits != 16) {
                    throw std::runtime_error("wav: only 16-bit PCM supported: " + path);
                }
                if (w.channels < 1 || w.sample_rate <= 0) {
                    throw std::runtime_error("wav: bad fmt chunk: " + path);
                }
                have_fmt = true;
                if (chunk_size > 16) std::fseek(f, static_cast<long>(chunk_size - 16), SEEK_CUR);
            } else if (std::memcmp(tag, "data", 4) == 0) {
                if (!have_fmt) throw std::runtime_error("wav: data before fmt: " + path);
                std::size_t count = chunk_size / 2;
                w.samples.resize(count);
                for (std::size_t i = 0; i < count; ++i) {
                    unsigned char b[2];
                    if (std::fread(b, 1, 2, f) != 2) {
                        throw std::runtime_error("wav: truncated data: " + path);
                    }
                    std::int16_t s = static_cast<std::int16_t>(b[0] | (b[1] << 8));
                    w.samples[i] = static_cast<double>(s) / 32768.0;
                }
                std::fclose(f);
                return w;
            } else {
                std::fseek(f, static_cast<long>(chunk_size + (chunk_size & 1)), SEEK_CUR);
            }
        }
        throw std::runtime_error("wav: no data chunk: " + path);
    } catch (...) {
        std::fclose(f);
        throw;
    }
}

void save_wav(const std::string& path, const Waveform& w) {
    if (w.sample_rate <= 0 || w.channels < 1) {
        throw std::invalid_argument("wav: bad sample rate or channel count");
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("wav: cannot open for write: " + path);
    std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    std::fwrite("RIFF", 1, 4, f);
    bytes::put_u32_le(f, 36 + data_bytes);
    std::fwrite("WAVE", 1, 4, f);
    std::fwrite("fmt ", 1, 4, f);
    bytes::put_u32_le(f, 16);
    put_u16_le(f, 1);  // PCM
    put_u16_le(f, static_cast<std::uint16_t>(w.channels));
    bytes::put_u32_le(f, static_cast<std::uint32_t>(w.sample_rate));
    bytes::put_u32_le(f, static_cast<std::uint32_t>(w.sample_rate * w.channels * 2));
    put_u16_le(f, static_cast<std::uint16_t>(w.channels * 2));
    put_u16_le(f, 16);
    std::fwrite("data", 1, 4, f);
    bytes::put_u32_le(f, data_bytes);
    for (double v : w.samples) {
        double c = std::max(-1.0, std::min(1.0, v));
        std::int16_t s = static_cast<std::int16_t>(std::lround(c * 32767.0));
        put_u16_le(f, static_cast<std::uint16_t>(s));
    }
    std::fclose(f);
}

Waveform resample_to_16k_mono(const Waveform& raw) {
    if (raw.sample_rate <= 0) throw std::invalid_argument("waveform sample rate must be positive");
    Waveform mono;
    mono.sample_rate = raw.sample_rate;
    mono.channels = 1;
    std::size_t frames = raw.frame_count();
    mono.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < raw.channels; ++c) {
            acc += raw.samples[i * static_cast<std::size_t>(raw.channels) +
                               static_cast<std::size_t>(c)];
        }
        mono.samples[i] = acc / raw.channels;
    }
    if (mono.sample_rate == 16000) return mono;
    Waveform out;
    out.sample_rate = 16000;
    out.channels = 1;
    double ratio = static_cast<double>(mono.sample_rate) / 16000.0;
    std::size_t n = static_cast<std::size_t>(
        std::floor(static_cast<double>(frames) / ratio));
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double pos = static_cast<double>(i) * ratio;
        std::size_t i0 = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(i0);
        std::size_t i1 = std::min(i0 + 1, frames == 0 ? 0 : frames - 1);
        double a = frames ? mono.samples[i0] : 0.0;
        double b = frames ? mono.samples[i1] : 0.0;
        out.samples[i] = a + (b - a) * frac;
    }
    return out;
}

}  // namespace mov
