#pragma once

#include <string>

#include "vitts/tensor.hpp"

namespace vitts {

// 8-bit RGBA PNG. Pixels are stored as an (H*W) x 4 tensor with values in
// [0, 1]; the depth channel travels in alpha.
void write_png_rgba(const std::string& path, const Tensor& pixels, int height,
                    int width);
Tensor read_png_rgba(const std::string& path, int& height, int& width);

}  // namespace vitts
