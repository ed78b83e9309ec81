#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lped/datapipe.hpp"
#include "lped/models.hpp"
#include "lped/tensor.hpp"

namespace lped::editor {

// Degraded gray photo plus the user's guidance, all (1, ., H, W).
struct EditRequest {
  Tensor gray;
  data::MaskMap mask;
  data::ScribbleMap scribbles;
};

class Inpainter {
 public:
  virtual ~Inpainter() = default;
  // masked, mask: (1, 1, H, W) with H, W multiples of 16.
  virtual Tensor inpaint(const Tensor& masked, const Tensor& mask) const = 0;
};

class Colorizer {
 public:
  virtual ~Colorizer() = default;
  virtual Tensor colorize(const Tensor& gray, const Tensor& hint,
                          const Tensor& indicator) const = 0;
};

class NetworkInpainter final : public Inpainter {
 public:
  explicit NetworkInpainter(std::shared_ptr<const models::InpaintNet> net)
      : net_(std::move(net)) {}
  Tensor inpaint(const Tensor& masked, const Tensor& mask) const override;

 private:
  std::shared_ptr<const models::InpaintNet> net_;
};

class NetworkColorizer final : public Colorizer {
 public:
  explicit NetworkColorizer(std::shared_ptr<const models::ColorNet> net)
      : net_(std::move(net)) {}
  Tensor colorize(const Tensor& gray, const Tensor& hint,
                  const Tensor& indicator) const override;

 private:
  std::shared_ptr<const models::ColorNet> net_;
};

// C and R read from editor checkpoints, plus what /v1/models reports.
struct LoadedModels {
  std::shared_ptr<const Inpainter> c;
  std::shared_ptr<const Colorizer> r;
  nlohmann::json meta;
  std::vector<std::string> checkpoint_ids;
};

// Both paths may name the same file. Throws Io/Format/Version on bad files.
LoadedModels load_models(const std::filesystem::path& checkpoint_c,
                         const std::filesystem::path& checkpoint_r);

// R(C(gray * mask, mask), scribbles). Inputs are reflect-padded on the
// bottom/right to a multiple of 16 and the (1, 3, H, W) result is cropped
// back. Null models raise a State error.
Tensor edit(const EditRequest& request, const Inpainter* c, const Colorizer* r);

// Reflect padding (edge pixel not repeated) of the bottom and right borders.
Tensor pad_reflect(const Tensor& image, int height, int width);
Tensor crop(const Tensor& image, int height, int width);

// Peak 1. Identical inputs give +infinity.
double psnr(const Tensor& a, const Tensor& b);
// Gaussian window 11 / sigma 1.5, K1 0.01, K2 0.03, range 1; mean over the
// fully covered windows of each channel, then over channels.
double ssim(const Tensor& a, const Tensor& b);
// Numbers as JSON; infinities become the string "inf".
nlohmann::json metric_json(double value);

struct EvalConfig {
  int size = 256;
  double sigma = 0.05;
  int scribbles = 30;
  int stroke_size = 5;
  std::uint64_t seed = 0;
  // Crack templates; empty means pseudo masks.
  std::filesystem::path masks_dir;
};

nlohmann::json to_json(const EvalConfig& config);

struct ImageScore {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  nlohmann::json config;
  std::vector<ImageScore> per_image;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  nlohmann::json to_json() const;
  std::string table() const;
};

// Full-scale figures the report quotes as a reference only.
inline constexpr double kReferencePsnr = 28.02;
inline constexpr double kReferenceSsim = 0.9408;

// Per image: resize/centre-crop to size, decolourise, mask, add noise, draw
// scribbles from the colour ground truth, edit, score against the colour
// ground truth. Image i draws from derive_rng(seed, 0, i).
EvalReport evaluate(const data::ImageFolder& images, const Inpainter& c,
                    const Colorizer& r, const EvalConfig& config);
EvalReport evaluate(const std::filesystem::path& dataset_dir, const Inpainter& c,
                    const Colorizer& r, const EvalConfig& config);

}  // namespace lped::editor
