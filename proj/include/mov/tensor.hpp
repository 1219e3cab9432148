#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mov {

// Dense row-major tensor of doubles. The one value type that crosses module
// boundaries: images, spectrograms, features, weights all live here.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values);

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int extent(int axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double& at(int i, int j, int k) {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double at(int i, int j, int k) const {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }

    // Same data, new extents; total size must match.
    Tensor reshaped(std::vector<int> shape) const;

    bool all_finite() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Exact comparison, used by freezing-contract tests.
bool bitwise_equal(const Tensor& a, const Tensor& b);

bool approx_equal(const Tensor& a, const Tensor& b, double tol);

// Binary tensor cache: "MOVT", version byte, rank byte, little-endian u32
// extents, then little-endian f64 payload.
void save_movt(const std::string& path, const Tensor& t);
Tensor load_movt(const std::string& path);

}  // namespace mov
