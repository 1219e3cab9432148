#pragma once

#include <string>

#include "mov/tensor.hpp"

namespace mov {

// Images are [H,W,3] tensors with values in [0,255]; grayscale maps are [H,W].

Tensor load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Tensor& image);

Tensor grayscale(const Tensor& rgb);  // 0.299 R + 0.587 G + 0.114 B

Tensor hflip_image(const Tensor& image);

}  // namespace mov
