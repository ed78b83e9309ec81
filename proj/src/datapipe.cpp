#include "lped/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include "lped/error.hpp"
#include "lped/image_io.hpp"

namespace lped::data {

Rng derive_rng(std::uint64_t seed, std::uint64_t worker, std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker),
                    static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(epoch >> 32)};
  return Rng(seq);
}

Tensor to_grayscale(const Tensor& rgb) {
  const Shape s = rgb.shape();
  if (s.c != 3) {
    fail(ErrorKind::Shape, "to_grayscale expects 3 channels, got " +
                               std::to_string(s.c));
  }
  Tensor out(Shape{s.n, 1, s.h, s.w});
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const double* r = rgb.plane(n, 0);
    const double* g = rgb.plane(n, 1);
    const double* b = rgb.plane(n, 2);
    double* dst = out.plane(n, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = std::clamp(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i], 0.0, 1.0);
    }
  }
  return out;
}

Tensor random_crop(const Tensor& image, int size, Rng& rng) {
  const Shape s = image.shape();
  if (s.h < size || s.w < size) {
    fail(ErrorKind::Value, "image " + std::to_string(s.h) + "x" +
                               std::to_string(s.w) + " is smaller than crop " +
                               std::to_string(size));
  }
  const int oy = std::uniform_int_distribution<int>(0, s.h - size)(rng);
  const int ox = std::uniform_int_distribution<int>(0, s.w - size)(rng);
  Tensor out(Shape{s.n, s.c, size, size});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < size; ++y) {
        const double* src = image.plane(n, c) + (y + oy) * s.w + ox;
        std::copy(src, src + size, out.plane(n, c) + y * size);
      }
    }
  }
  return out;
}

Tensor apply_mask(const Tensor& image, const MaskMap& mask) {
  const Shape s = image.shape();
  const Shape ms = mask.values.shape();
  if (ms.h != s.h || ms.w != s.w || ms.c != 1 || (ms.n != 1 && ms.n != s.n)) {
    fail(ErrorKind::Shape, "apply_mask: mask " + ms.str() +
                               " does not fit image " + s.str());
  }
  Tensor out(s);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const double* m = mask.values.plane(ms.n == 1 ? 0 : n, 0);
    for (int c = 0; c < s.c; ++c) {
      const double* src = image.plane(n, c);
      double* dst = out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * m[i];
    }
  }
  return out;
}

Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) fail(ErrorKind::Value, "noise sigma must be >= 0");
  if (sigma == 0.0) return image;
  std::normal_distribution<double> noise(0.0, sigma);
  Tensor out(image.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(image[i] + noise(rng), 0.0, 1.0);
  }
  return out;
}

ScribbleMap empty_scribbles(int height, int width) {
  return ScribbleMap{Tensor(Shape{1, 3, height, width}),
                     Tensor(Shape{1, 1, height, width})};
}

ScribbleMap sample_scribbles(const Tensor& color_gt, int count, int stroke_size,
                             Rng& rng) {
  const Shape s = color_gt.shape();
  if (s.c != 3 || s.n != 1) {
    fail(ErrorKind::Shape, "scribbles need a (1, 3, H, W) colour image, got " +
                               s.str());
  }
  if (count < 0) fail(ErrorKind::Value, "scribble count must be >= 0");
  if (stroke_size < 1) fail(ErrorKind::Value, "stroke size must be >= 1");
  ScribbleMap out = empty_scribbles(s.h, s.w);
  std::uniform_int_distribution<int> ys(0, s.h - 1);
  std::uniform_int_distribution<int> xs(0, s.w - 1);
  const int half = stroke_size / 2;
  for (int k = 0; k < count; ++k) {
    const int cy = ys(rng);
    const int cx = xs(rng);
    const double colour[3] = {color_gt.at(0, 0, cy, cx), color_gt.at(0, 1, cy, cx),
                              color_gt.at(0, 2, cy, cx)};
    const int y0 = std::max(0, cy - half);
    const int y1 = std::min(s.h, cy - half + stroke_size);
    const int x0 = std::max(0, cx - half);
    const int x1 = std::min(s.w, cx - half + stroke_size);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        for (int c = 0; c < 3; ++c) out.hint.at(0, c, y, x) = colour[c];
        out.indicator.at(0, 0, y, x) = 1.0;
      }
    }
  }
  return out;
}

MaskMap binarize(const Tensor& gray) {
  if (gray.shape().c != 1) {
    fail(ErrorKind::Shape, "mask must be single-channel, got " + gray.shape().str());
  }
  Tensor out(gray.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gray[i] >= 0.5 ? 1.0 : 0.0;
  return MaskMap{std::move(out)};
}

MaskMap crop_mask_template(std::span<const MaskMap> templates, int size,
                           Rng& rng) {
  if (templates.empty()) fail(ErrorKind::Config, "no mask templates available");
  const auto index = std::uniform_int_distribution<std::size_t>(
      0, templates.size() - 1)(rng);
  return binarize(random_crop(templates[index].values, size, rng));
}

MaskMap full_mask(int height, int width) {
  return MaskMap{Tensor(Shape{1, 1, height, width}, 1.0)};
}

MaskMap pseudo_crack_mask(int height, int width, Rng& rng) {
  MaskMap mask = full_mask(height, width);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int cracks = 1 + std::uniform_int_distribution<int>(0, 3)(rng);
  const int length = (height + width) / 2;
  for (int k = 0; k < cracks; ++k) {
    double y = unit(rng) * height;
    double x = unit(rng) * width;
    double heading = unit(rng) * 2.0 * std::numbers::pi;
    const int radius = std::uniform_int_distribution<int>(0, 1)(rng);
    for (int step = 0; step < length; ++step) {
      heading += (unit(rng) - 0.5) * 0.8;
      y += std::sin(heading);
      x += std::cos(heading);
      const int cy = static_cast<int>(y);
      const int cx = static_cast<int>(x);
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int py = cy + dy;
          const int px = cx + dx;
          if (py >= 0 && py < height && px >= 0 && px < width) {
            mask.values.at(0, 0, py, px) = 0.0;
          }
        }
      }
    }
  }
  return mask;
}

SamplePair make_training_sample(const Tensor& clean_rgb, const Degrader& degrade,
                                std::span<const MaskMap> templates,
                                const SampleConfig& config, Rng& rng) {
  SamplePair out;
  out.clean_color = random_crop(clean_rgb, config.crop, rng);
  out.clean_gray = to_grayscale(out.clean_color);
  Tensor degraded = degrade ? degrade(out.clean_gray) : out.clean_gray;
  require_same_shape(degraded.shape(), out.clean_gray.shape(), "degrader output");
  for (double& v : degraded.values()) v = std::clamp(v, 0.0, 1.0);
  out.degraded = add_gaussian_noise(degraded, config.extra_noise_sigma, rng);
  out.mask = templates.empty()
                 ? pseudo_crack_mask(config.crop, config.crop, rng)
                 : crop_mask_template(templates, config.crop, rng);
  out.masked = apply_mask(out.degraded, out.mask);
  const int count =
      std::uniform_int_distribution<int>(0, std::max(0, config.max_scribbles))(rng);
  out.scribbles = sample_scribbles(out.clean_color, count, config.stroke_size, rng);
  return out;
}

SampleBatch stack_samples(std::span<const SamplePair> samples) {
  std::vector<Tensor> color, gray, masked, mask, hint, indicator;
  for (const SamplePair& s : samples) {
    color.push_back(s.clean_color);
    gray.push_back(s.clean_gray);
    masked.push_back(s.masked);
    mask.push_back(s.mask.values);
    hint.push_back(s.scribbles.hint);
    indicator.push_back(s.scribbles.indicator);
  }
  return SampleBatch{Tensor::stack(color),  Tensor::stack(gray),
                     Tensor::stack(masked), Tensor::stack(mask),
                     Tensor::stack(hint),   Tensor::stack(indicator)};
}

ImageFolder load_folder(const std::filesystem::path& dir, int channels,
                        int min_side) {
  ImageFolder out;
  for (const auto& path : io::list_images(dir)) {
    Tensor img = io::load_image(path, channels);
    if (std::min(img.shape().h, img.shape().w) < min_side) {
      std::cerr << "warning: skipping " << path.string() << " (smaller than "
                << min_side << " px)\n";
      continue;
    }
    out.ids.push_back(path.filename().string());
    out.images.push_back(std::move(img));
  }
  return out;
}

std::vector<MaskMap> load_mask_templates(const std::filesystem::path& dir,
                                         int min_side) {
  std::vector<MaskMap> out;
  for (Tensor& img : load_folder(dir, 1, min_side).images) {
    out.push_back(binarize(img));
  }
  return out;
}

}  // namespace lped::data
