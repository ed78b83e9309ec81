#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lped/tensor.hpp"

namespace lped::data {

using Rng = std::mt19937_64;

// Independent generator for one prefetch worker in one epoch.
Rng derive_rng(std::uint64_t seed, std::uint64_t worker, std::uint64_t epoch);

// Binary (1, 1, H, W) map; 0 marks a crack / missing pixel.
struct MaskMap {
  Tensor values;
};

// hint (1, 3, H, W) colours, zero wherever indicator (1, 1, H, W) is zero.
struct ScribbleMap {
  Tensor hint;
  Tensor indicator;
};

// One training example for the editor. All tensors share H x W and
// masked == degraded * mask.
struct SamplePair {
  Tensor clean_color;  // z
  Tensor clean_gray;   // x
  Tensor degraded;     // x hat
  Tensor masked;       // x double-dot
  MaskMap mask;        // m
  ScribbleMap scribbles;
};

// BT.601 luma, (N, 3, H, W) -> (N, 1, H, W).
Tensor to_grayscale(const Tensor& rgb);

// Uniform size x size window; no resampling.
Tensor random_crop(const Tensor& image, int size, Rng& rng);

Tensor apply_mask(const Tensor& image, const MaskMap& mask);

// x + N(0, sigma^2), clamped to [0, 1].
Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng);

// `count` squares of side `stroke_size` centred on uniform pixels, each
// filled with the ground-truth colour at its centre. Squares are clipped at
// the border and may overlap.
ScribbleMap sample_scribbles(const Tensor& color_gt, int count, int stroke_size,
                             Rng& rng);
ScribbleMap empty_scribbles(int height, int width);

// Thresholds a gray image at 0.5 (>= 0.5 -> 1).
MaskMap binarize(const Tensor& gray);
MaskMap crop_mask_template(std::span<const MaskMap> templates, int size, Rng& rng);
MaskMap full_mask(int height, int width);
// Random crack-like polylines, used when no template folder is given.
MaskMap pseudo_crack_mask(int height, int width, Rng& rng);

// Clean-to-noisy translation applied to (1, 1, H, W) gray crops.
using Degrader = std::function<Tensor(const Tensor&)>;

struct SampleConfig {
  int crop = 256;
  double extra_noise_sigma = 0.05;
  int max_scribbles = 30;
  int stroke_size = 5;
};

// Crop, decolourise, degrade with G (+ extra Gaussian noise), mask and draw
// scribbles. Degraded values are clamped to [0, 1]. When `templates` is
// empty a pseudo crack mask is drawn instead.
SamplePair make_training_sample(const Tensor& clean_rgb, const Degrader& degrade,
                                std::span<const MaskMap> templates,
                                const SampleConfig& config, Rng& rng);

// Stacked (N, ...) tensors of several samples.
struct SampleBatch {
  Tensor clean_color;
  Tensor clean_gray;
  Tensor masked;
  Tensor mask;
  Tensor hint;
  Tensor indicator;
};
SampleBatch stack_samples(std::span<const SamplePair> samples);

// ---- folders

struct ImageFolder {
  std::vector<std::string> ids;
  std::vector<Tensor> images;
};

// Loads every image of `dir` with the given channel count. Images whose
// shorter side is below `min_side` are skipped with a warning on stderr.
ImageFolder load_folder(const std::filesystem::path& dir, int channels,
                        int min_side);
std::vector<MaskMap> load_mask_templates(const std::filesystem::path& dir,
                                         int min_side);

}  // namespace lped::data
