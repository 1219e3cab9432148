#include "mov/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace mov {

namespace {

int read_pnm_int(std::FILE* f) {
    int c = std::fgetc(f);
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
        } else if (std::isspace(c)) {
            c = std::fgetc(f);
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw std::runtime_error("ppm: malformed header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = std::fgetc(f);
    }
    return value;
}

}  // namespace

Tensor load_ppm(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("ppm: cannot open: " + path);
    try {
        if (std::fgetc(f) != 'P' || std::fgetc(f) != '6') {
            throw std::runtime_error("ppm: not a P6 file: " + path);
        }
        int w = read_pnm_int(f);
        int h = read_pnm_int(f);
        int maxval = read_pnm_int(f);
        if (w <= 0 || h <= 0 || maxval != 255) {
            throw std::runtime_error("ppm: unsupported dimensions or depth: " + path);
        }
        std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
        if (std::fread(raw.data(), 1, raw.size(), f) != raw.size()) {
            throw std::runtime_error("ppm: truncated pixel data: " + path);
        }
        std::fclose(f);
        Tensor img({h, w, 3});
        for (std::size_t i = 0; i < raw.size(); ++i) {
            img.data()[i] = static_cast<double>(raw[i]);
        }
        return img;
    } catch (...) {
        std::fclose(f);
        throw;
    }
}

void save_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.extent(2) != 3) {
        throw std::invalid_argument("ppm: image must be [H,W,3]");
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("ppm: cannot open for write: " + path);
    std::fprintf(f, "P6\n%d %d\n255\n", image.extent(1), image.extent(0));
    for (std::size_t i = 0; i < image.size(); ++i) {
        double v = std::round(image.data()[i]);
        if (v < 0.0) v = 0.0;
        if (v > 255.0) v = 255.0;
        unsigned char b = static_cast<unsigned char>(v);
        std::fwrite(&b, 1, 1, f);
    }
    std::fclose(f);
}

Tensor grayscale(const Tensor& rgb) {
    if (rgb.rank() != 3 || rgb.extent(2) != 3) {
        throw std::invalid_argument("grayscale expects [H,W,3]");
    }
    int h = rgb.extent(0), w = rgb.extent(1);
    Tensor out({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            out.at(y, x) =
                0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) + 0.114 * rgb.at(y, x, 2);
        }
    return out;
}

Tensor hflip_image(const Tensor& image) {
    if (image.rank() != 3) throw std::invalid_argument("hflip expects [H,W,C]");
    int h = image.extent(0), w = image.extent(1), c = image.extent(2);
    Tensor out(image.shape());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) out.at(y, x, k) = image.at(y, w - 1 - x, k);
    return out;
}

}  // namespace mov
