#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "lped/models.hpp"
#include "lped/objectives.hpp"

namespace lped {

// Toggles for the ablation settings. Each flag is independent.
struct AblationFlags {
  bool use_dwt_losses = true;   // off: no low-band loss, critics see whole images
  bool use_perceptual = true;   // off: drop the colour perceptual term
  bool use_gan = true;          // off: drop the colour adversarial term and D_R
  bool joint_training = true;   // off: skip the joint second stage
  int max_scribbles = 30;       // upper bound of scribbles drawn per sample
  bool train_inpaint_critic = false;  // adds an LSGAN term on C with D_C
  bool joint_backprop = true;   // stage 2: gradients of R's losses reach C
};

struct TrainConfig {
  double stage1_lr = 1e-4;
  double stage2_lr = 5e-5;
  int stage1_epochs = 20;
  int stage2_epochs = 20;
  // 0 derives one epoch from the dataset size and batch size.
  int steps_per_epoch = 0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int crop = 256;
  std::uint64_t seed = 0;

  AblationFlags ablation;
  models::ModelConfig model;
  objectives::NeganWeights negan;
  objectives::IeganWeights iegan;

  // Extra Gaussian noise on degraded editor inputs, and scribble geometry.
  double extra_noise_sigma = 0.05;
  int stroke_size = 5;
  // Optional checkpoint holding pretrained perceptual-extractor weights.
  std::string perceptual_weights;

  // Throws Config on out-of-range values.
  void validate() const;
};

// Reference settings for full-size training.
TrainConfig full_profile();
// CPU-sized settings: 64x64 crops, batch 8, all widths divided by 4.
TrainConfig desk_profile();

nlohmann::json to_json(const TrainConfig& config);
// Overlays the keys present in `j` onto `base`. Unknown keys and wrong types
// raise Config errors. A "profile" key ("full" or "desk") picks the base.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_config_file(const std::string& path);

nlohmann::json to_json(const models::ModelConfig& model);
models::ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace lped
