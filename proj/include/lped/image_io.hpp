#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lped/tensor.hpp"

// 8-bit image files <-> (1, C, H, W) tensors in [0, 1] (value / 255).
namespace lped::io {

// channels: 1 forces grayscale (luma), 3 forces RGB, 0 keeps the file's
// own layout (gray stays 1 channel, colour becomes RGB, alpha is dropped).
Tensor load_image(const std::filesystem::path& path, int channels);
Tensor decode_image(std::span<const std::uint8_t> bytes, int channels);

// Values are clamped to [0, 1] and rounded to 8 bits.
std::vector<std::uint8_t> encode_png(const Tensor& image);
void save_png(const Tensor& image, const std::filesystem::path& path);

// Regular files with a png/jpg/jpeg extension, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Resizes so the shorter side equals `size` (area filter when shrinking,
// bilinear when enlarging) and centre-crops to size x size.
Tensor resize_center_crop(const Tensor& image, int size);

}  // namespace lped::io
