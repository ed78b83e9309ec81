#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lped/checkpoint.hpp"
#include "lped/config.hpp"
#include "lped/datapipe.hpp"
#include "lped/models.hpp"
#include "lped/optim.hpp"

namespace lped {

// Loss terms of one update, keyed by term name. Only terms that took part in
// the update appear, so ablations are visible in the key set.
struct StepLog {
  std::int64_t step = 0;
  int stage = 1;
  std::map<std::string, double> terms;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  int stage = 1;
  std::int64_t steps = 0;
  std::map<std::string, double> mean_terms;
};

nlohmann::json to_json(const StepLog& log);
nlohmann::json to_json(const EpochLog& log);

using EpochCallback = std::function<void(const EpochLog&)>;

// Xavier-uniform weights (bound sqrt(6 / (fan_in + fan_out)) with
// fan = channels * k * k), zero biases, zero for parameters the network marks
// zero-init, and unit random vectors for spectral-norm buffers.
void init_params(models::Network& net, data::Rng& rng);

// Unpaired clean/noisy translation learner (G: clean -> noisy, F: back).
// Each step updates D_N and D_X first, then G and F together.
class NeganTrainer {
 public:
  // Both image lists hold (1, 1, H, W) gray images at least `crop` wide.
  NeganTrainer(TrainConfig config, std::vector<Tensor> clean,
               std::vector<Tensor> noisy);

  StepLog step();
  std::vector<EpochLog> run(const EpochCallback& on_epoch = {});

  int steps_per_epoch() const;
  std::int64_t steps_done() const { return step_; }
  const TrainConfig& config() const { return config_; }

  const models::NoiseGenerator& g() const { return *g_; }
  const models::NoiseGenerator& f() const { return *f_; }
  models::NoiseGenerator& g() { return *g_; }
  const models::PatchDiscriminator& d_n() const { return *d_n_; }
  const models::PatchDiscriminator& d_x() const { return *d_x_; }

  ckpt::Checkpoint checkpoint() const;
  // Restores parameters, buffers, optimiser moments and the step counter.
  // The checkpoint's config must match this trainer's architecture.
  void restore(const ckpt::Checkpoint& checkpoint);

 private:
  TrainConfig config_;
  std::vector<Tensor> clean_;
  std::vector<Tensor> noisy_;
  std::unique_ptr<models::NoiseGenerator> g_;
  std::unique_ptr<models::NoiseGenerator> f_;
  std::unique_ptr<models::PatchDiscriminator> d_n_;
  std::unique_ptr<models::PatchDiscriminator> d_x_;
  std::unique_ptr<Adam> opt_gen_;
  std::unique_ptr<Adam> opt_disc_;
  std::int64_t step_ = 0;
};

// Inpainting (C) and colourisation (R) networks plus the colour critic.
// Stage 1 trains C and R independently with R fed the clean gray image;
// stage 2 (if enabled) feeds C's output into R and optimises both jointly.
class IeganTrainer {
 public:
  IeganTrainer(TrainConfig config, std::vector<Tensor> clean_rgb,
               std::vector<data::MaskMap> templates, data::Degrader frozen_g);

  StepLog step();
  std::vector<EpochLog> run(const EpochCallback& on_epoch = {});

  int steps_per_epoch() const;
  std::int64_t stage1_steps() const;
  std::int64_t total_steps() const;
  std::int64_t steps_done() const { return step_; }
  int current_stage() const;
  const TrainConfig& config() const { return config_; }

  const models::InpaintNet& c() const { return *c_; }
  const models::ColorNet& r() const { return *r_; }
  const models::EditCritic& d_r() const { return *d_r_; }
  const models::EditCritic* d_c() const { return d_c_.get(); }

  ckpt::Checkpoint checkpoint() const;
  void restore(const ckpt::Checkpoint& checkpoint);

 private:
  data::SampleBatch draw_batch();

  TrainConfig config_;
  std::vector<Tensor> clean_;
  std::vector<data::MaskMap> templates_;
  data::Degrader degrade_;
  std::unique_ptr<models::InpaintNet> c_;
  std::unique_ptr<models::ColorNet> r_;
  std::unique_ptr<models::EditCritic> d_r_;
  std::unique_ptr<models::EditCritic> d_c_;
  std::unique_ptr<models::PerceptualExtractor> vgg_;
  std::unique_ptr<Adam> opt_c_;
  std::unique_ptr<Adam> opt_r_;
  std::unique_ptr<Adam> opt_d_;
  std::int64_t step_ = 0;
};

// Degrader that runs a frozen generator on gray crops.
data::Degrader degrader_from(std::shared_ptr<const models::NoiseGenerator> g);

// G over a (1, 1, H, W) image of any size, processed in overlapping tiles
// so memory stays bounded. Matches a whole-image pass up to rounding.
Tensor degrade_image(const models::NoiseGenerator& g, const Tensor& gray,
                     int tile = 128);

// Builds a generator from a noise-learner checkpoint ("G" network).
std::shared_ptr<models::NoiseGenerator> load_noise_generator(
    const ckpt::Checkpoint& checkpoint);

// Perceptual trunk with fixed-seed random weights, or weights read from the
// checkpoint at `weights_path` when non-empty.
std::unique_ptr<models::PerceptualExtractor> make_perceptual_extractor(
    int width, const std::string& weights_path);

}  // namespace lped
