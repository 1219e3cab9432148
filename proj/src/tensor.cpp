#include "mov/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace mov {

namespace {

std::size_t checked_size(const std::vector<int>& shape) {
    if (shape.empty()) {
        throw std::invalid_argument("tensor shape must have at least one extent");
    }
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) {
            throw std::invalid_argument("tensor extents must be positive");
        }
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_size(shape_), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = value;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    std::size_t n = checked_size(shape);
    if (values.size() != n) {
        throw std::invalid_argument("tensor data length does not match shape");
    }
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

int Tensor::extent(int axis) const {
    if (axis < 0 || axis >= rank()) {
        throw std::invalid_argument("tensor axis out of range");
    }
    return shape_[static_cast<std::size_t>(axis)];
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (checked_size(shape) != size()) {
        throw std::invalid_argument("reshape size mismatch");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    if (a.size() == 0) return true;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool approx_equal(const Tensor& a, const Tensor& b, double tol) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::fabs(a.data()[i] - b.data()[i]) > tol) return false;
    }
    return true;
}

namespace {

void put_u32_le(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    std::fwrite(b, 1, 4, f);
}

std::uint32_t get_u32_le(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) {
        throw std::runtime_error("movt: truncated header");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64_le(std::FILE* f, double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 8, f);
}

double get_f64_le(std::FILE* f) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) {
        throw std::runtime_error("movt: truncated payload");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}

}  // namespace

void save_movt(const std::string& path, const Tensor& t) {
    if (t.rank() == 0) {
        throw std::invalid_argument("movt: cannot save empty tensor");
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) {
        throw std::runtime_error("movt: cannot open for write: " + path);
    }
    std::fwrite("MOVT", 1, 4, f);
    unsigned char version = 1;
    unsigned char rank = static_cast<unsigned char>(t.rank());
    std::fwrite(&version, 1, 1, f);
    std::fwrite(&rank, 1, 1, f);
    for (int a = 0; a < t.rank(); ++a) {
        put_u32_le(f, static_cast<std::uint32_t>(t.extent(a)));
    }
    for (std::size_t i = 0; i < t.size(); ++i) put_f64_le(f, t.data()[i]);
    std::fclose(f);
}

Tensor load_movt(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) {
        throw std::runtime_error("movt: cannot open: " + path);
    }
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "MOVT", 4) != 0) {
        std::fclose(f);
        throw std::runtime_error("movt: bad magic in " + path);
    }
    unsigned char version = 0, rank = 0;
    if (std::fread(&version, 1, 1, f) != 1 || version != 1 || std::fread(&rank, 1, 1, f) != 1 ||
        rank == 0) {
        std::fclose(f);
        throw std::runtime_error("movt: bad header in " + path);
    }
    std::vector<int> shape(rank);
    std::size_t n = 1;
    try {
        for (int a = 0; a < rank; ++a) {
            std::uint32_t e = get_u32_le(f);
            if (e == 0 || e > (1u << 30)) throw std::runtime_error("movt: bad extent");
            shape[static_cast<std::size_t>(a)] = static_cast<int>(e);
            n *= e;
        }
        std::vector<double> data(n);
        for (std::size_t i = 0; i < n; ++i) data[i] = get_f64_le(f);
        std::fclose(f);
        f = nullptr;
        Tensor t = Tensor::from(std::move(shape), std::move(data));
        if (!t.all_finite()) {
            throw std::runtime_error("movt: non-finite payload in " + path);
        }
        return t;
    } catch (...) {
        if (f) std::fclose(f);
        throw;
    }
}

}  // namespace mov
