#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgr/tensor.hpp"

namespace dgr {

// 8-bit RGB PNG. Tensors are [1,3,H,W] in [0,1]; values are quantized to
// 8 bits on write.
void save_image_png(const std::string& path, const Tensor& image);
Tensor load_image_png(const std::string& path);

// Single-channel 32-bit float little-endian PFM ("Pf", negative scale,
// bottom-up rows). Tensors are [1,1,H,W].
void save_pfm(const std::string& path, const Tensor& map);
Tensor load_pfm(const std::string& path);

// FNV-1a 64 over a file's bytes, as a fixed-width hex string.
std::string file_checksum(const std::string& path);

}  // namespace dgr
