#include "lped/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "lped/error.hpp"
#include "lped/objectives.hpp"
#include "lped/ops.hpp"
#include "lped/wavelet.hpp"

namespace lped {
namespace {

using objectives::Mapping;

// Random streams, combined with the step counter through derive_rng so that
// any step's draws can be recreated after a checkpoint restore.
constexpr std::uint64_t kNeganDataStream = 0;
constexpr std::uint64_t kIeganDataStream = 1;
constexpr std::uint64_t kInitStream = 100;
constexpr std::uint64_t kPerceptualSeed = 0x5EED0F4E47ULL;

std::vector<models::NamedVar> params_of(
    std::initializer_list<const models::Network*> nets) {
  std::vector<models::NamedVar> out;
  for (const models::Network* net : nets) {
    if (net == nullptr) continue;
    out.insert(out.end(), net->parameters().begin(), net->parameters().end());
  }
  return out;
}

std::string combined_hash(std::initializer_list<const models::Network*> nets) {
  std::vector<std::pair<std::string, Shape>> entries;
  for (const models::Network* net : nets) {
    if (net == nullptr) continue;
    for (const auto& [name, var] : net->parameters()) entries.emplace_back(name, var.shape());
  }
  return ckpt::hex64(models::architecture_hash(entries));
}

std::unique_ptr<Adam> make_adam(const TrainConfig& c,
                                std::vector<models::NamedVar> params, double lr) {
  return std::make_unique<Adam>(std::move(params), lr, c.adam_beta1,
                                c.adam_beta2, c.adam_eps);
}

Tensor stacked_crops(const std::vector<Tensor>& images, int count, int crop,
                     data::Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  std::vector<Tensor> crops;
  crops.reserve(count);
  for (int b = 0; b < count; ++b) {
    crops.push_back(data::random_crop(images[pick(rng)], crop, rng));
  }
  return Tensor::stack(crops);
}

void check_images(const std::vector<Tensor>& images, int channels, int crop,
                  const char* what) {
  if (images.empty()) {
    fail(ErrorKind::Config, std::string(what) + " dataset is empty");
  }
  for (const Tensor& t : images) {
    if (t.shape().n != 1 || t.shape().c != channels) {
      fail(ErrorKind::Shape, std::string(what) + " image has shape " +
                                 t.shape().str() + ", expected " +
                                 std::to_string(channels) + " channel(s)");
    }
    if (t.shape().h < crop || t.shape().w < crop) {
      fail(ErrorKind::Data, std::string(what) + " image smaller than the crop size");
    }
  }
}

// Accumulates per-term means across one epoch.
class EpochAccumulator {
 public:
  void add(const StepLog& log) {
    ++steps_;
    for (const auto& [k, v] : log.terms) sums_[k] += v;
  }
  EpochLog finish(int epoch, int stage) const {
    EpochLog out{epoch, stage, steps_, {}};
    for (const auto& [k, v] : sums_) out.mean_terms[k] = v / static_cast<double>(steps_);
    return out;
  }

 private:
  std::int64_t steps_ = 0;
  std::map<std::string, double> sums_;
};

void check_config_matches(const ckpt::Checkpoint& checkpoint,
                          const TrainConfig& config, const char* kind) {
  if (checkpoint.meta.value("kind", "") != kind) {
    fail(ErrorKind::Format, std::string("checkpoint is not a ") + kind + " checkpoint");
  }
  const TrainConfig stored = config_from_json(checkpoint.meta.at("config"));
  if (!(stored.model == config.model) ||
      stored.ablation.use_dwt_losses != config.ablation.use_dwt_losses ||
      stored.ablation.train_inpaint_critic != config.ablation.train_inpaint_critic) {
    fail(ErrorKind::Config, "checkpoint architecture differs from the trainer's config");
  }
}

}  // namespace

nlohmann::json to_json(const StepLog& log) {
  return {{"step", log.step}, {"stage", log.stage}, {"terms", log.terms}};
}

nlohmann::json to_json(const EpochLog& log) {
  return {{"epoch", log.epoch},
          {"stage", log.stage},
          {"steps", log.steps},
          {"mean_terms", log.mean_terms}};
}

void init_params(models::Network& net, data::Rng& rng) {
  for (const auto& [name, var] : net.parameters()) {
    Var handle = var;
    Tensor& t = handle.mutable_value();
    const bool is_bias = name.size() >= 5 && name.ends_with("/bias");
    if (is_bias || net.zero_init().count(name)) {
      t.fill(0.0);
      continue;
    }
    const Shape s = t.shape();
    const double receptive = static_cast<double>(s.h) * s.w;
    const double fan_in = s.c * receptive;
    const double fan_out = s.n * receptive;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.values()) v = dist(rng);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& [name, var] : net.buffers()) {
    Var handle = var;
    Tensor& t = handle.mutable_value();
    double norm = 0.0;
    for (double& v : t.values()) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::max(std::sqrt(norm), 1e-12);
    for (double& v : t.values()) v /= norm;
  }
}

// ------------------------------------------------------------------ NEGAN

NeganTrainer::NeganTrainer(TrainConfig config, std::vector<Tensor> clean,
                           std::vector<Tensor> noisy)
    : config_(std::move(config)), clean_(std::move(clean)), noisy_(std::move(noisy)) {
  config_.validate();
  check_images(clean_, 1, config_.crop, "clean");
  check_images(noisy_, 1, config_.crop, "noisy");
  const auto& m = config_.model;
  const int disc_in = config_.ablation.use_dwt_losses ? 3 : 1;
  g_ = std::make_unique<models::NoiseGenerator>("G", m.negan_width, m.negan_blocks);
  f_ = std::make_unique<models::NoiseGenerator>("F", m.negan_width, m.negan_blocks);
  d_n_ = std::make_unique<models::PatchDiscriminator>("D_N", disc_in, m.disc_width);
  d_x_ = std::make_unique<models::PatchDiscriminator>("D_X", disc_in, m.disc_width);
  std::uint64_t stream = kInitStream;
  for (models::Network* net : {static_cast<models::Network*>(g_.get()),
                               static_cast<models::Network*>(f_.get()),
                               static_cast<models::Network*>(d_n_.get()),
                               static_cast<models::Network*>(d_x_.get())}) {
    data::Rng rng = data::derive_rng(config_.seed, stream++, 0);
    init_params(*net, rng);
  }
  opt_gen_ = make_adam(config_, params_of({g_.get(), f_.get()}), config_.stage1_lr);
  opt_disc_ = make_adam(config_, params_of({d_n_.get(), d_x_.get()}), config_.stage1_lr);
}

int NeganTrainer::steps_per_epoch() const {
  if (config_.steps_per_epoch > 0) return config_.steps_per_epoch;
  const std::size_t n = std::max(clean_.size(), noisy_.size());
  return static_cast<int>((n + config_.batch_size - 1) / config_.batch_size);
}

StepLog NeganTrainer::step() {
  data::Rng rng = data::derive_rng(config_.seed, kNeganDataStream, step_);
  const Var x(stacked_crops(clean_, config_.batch_size, config_.crop, rng));
  const Var n(stacked_crops(noisy_, config_.batch_size, config_.crop, rng));
  const bool dwt = config_.ablation.use_dwt_losses;
  auto view = [dwt](const Var& v) { return dwt ? wavelet::high_part(v) : v; };

  StepLog log;
  log.step = step_;
  log.stage = 1;

  const Var g_x = g_->forward(x);
  const Var f_n = f_->forward(n);

  // Discriminators: fakes towards 0, real samples towards 1. The first
  // forward of each critic per step refreshes its spectral-norm estimates.
  d_n_->set_trainable(true);
  d_x_->set_trainable(true);
  opt_disc_->zero_grad();
  bool fresh_n = true;
  bool fresh_x = true;
  const Mapping dn_update = [&](const Var& v) {
    const bool update = std::exchange(fresh_n, false);
    return d_n_->forward(v, update);
  };
  const Mapping dx_update = [&](const Var& v) {
    const bool update = std::exchange(fresh_x, false);
    return d_x_->forward(v, update);
  };
  Var loss_dn, loss_dx;
  if (dwt) {
    loss_dn = objectives::l_high_disc(dn_update, view(detach(g_x)), view(n));
    loss_dx = objectives::l_high_disc(dx_update, view(detach(f_n)), view(x));
  } else {
    loss_dn = objectives::lsq_disc(dn_update, detach(g_x), n);
    loss_dx = objectives::lsq_disc(dx_update, detach(f_n), x);
  }
  backward(ops::add(loss_dn, loss_dx));
  opt_disc_->step();
  log.terms["d_n"] = loss_dn.item();
  log.terms["d_x"] = loss_dx.item();

  // Generators against the updated, frozen critics.
  d_n_->set_trainable(false);
  d_x_->set_trainable(false);
  opt_gen_->zero_grad();
  const Mapping dn = [&](const Var& v) { return d_n_->forward(v, false); };
  const Mapping dx = [&](const Var& v) { return d_x_->forward(v, false); };
  const Var f_g_x = f_->forward(g_x);
  const Var g_f_n = g_->forward(f_n);
  objectives::NeganParts parts;
  if (dwt) parts.low = objectives::l_low_from(g_x, f_g_x, x);
  parts.cycle = objectives::l_cycle_from(f_g_x, x, g_f_n, n);
  if (dwt) {
    parts.high_g = objectives::l_high_gen(dn, view(g_x));
    parts.high_f = objectives::l_high_gen(dx, view(f_n));
  } else {
    parts.high_g = objectives::lsq_gen(dn, g_x);
    parts.high_f = objectives::lsq_gen(dx, f_n);
  }
  const Var total = objectives::l_negan_total(config_.negan, parts);
  backward(total);
  opt_gen_->step();
  d_n_->set_trainable(true);
  d_x_->set_trainable(true);

  if (dwt) log.terms["l_low"] = parts.low.item();
  log.terms["l_cycle"] = parts.cycle.item();
  const std::string domain = dwt ? "_high" : "_full";
  log.terms["adv_g" + domain] = parts.high_g.item();
  log.terms["adv_f" + domain] = parts.high_f.item();
  log.terms["total"] = total.item();
  ++step_;
  return log;
}

std::vector<EpochLog> NeganTrainer::run(const EpochCallback& on_epoch) {
  std::vector<EpochLog> logs;
  const int spe = steps_per_epoch();
  const std::int64_t start_epoch = step_ / spe;
  for (std::int64_t e = start_epoch; e < config_.stage1_epochs; ++e) {
    EpochAccumulator acc;
    while (step_ < (e + 1) * spe) acc.add(step());
    logs.push_back(acc.finish(static_cast<int>(e) + 1, 1));
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

ckpt::Checkpoint NeganTrainer::checkpoint() const {
  ckpt::Checkpoint out;
  out.meta["kind"] = "negan";
  out.meta["config"] = to_json(config_);
  out.meta["step"] = step_;
  out.meta["epoch"] = step_ / steps_per_epoch();
  out.meta["rng"] = {{"engine", "mt19937_64"},
                     {"seed", config_.seed},
                     {"stream", kNeganDataStream},
                     {"next_step", step_}};
  out.meta["architecture_hash"] =
      combined_hash({g_.get(), f_.get(), d_n_.get(), d_x_.get()});
  for (const models::Network* net :
       {static_cast<const models::Network*>(g_.get()),
        static_cast<const models::Network*>(f_.get()),
        static_cast<const models::Network*>(d_n_.get()),
        static_cast<const models::Network*>(d_x_.get())}) {
    ckpt::store_network(out, *net);
  }
  opt_gen_->store(out, "adam_gen");
  opt_disc_->store(out, "adam_disc");
  return out;
}

void NeganTrainer::restore(const ckpt::Checkpoint& checkpoint) {
  check_config_matches(checkpoint, config_, "negan");
  for (models::Network* net :
       {static_cast<models::Network*>(g_.get()), static_cast<models::Network*>(f_.get()),
        static_cast<models::Network*>(d_n_.get()),
        static_cast<models::Network*>(d_x_.get())}) {
    ckpt::restore_network(checkpoint, *net);
  }
  opt_gen_->restore(checkpoint, "adam_gen");
  opt_disc_->restore(checkpoint, "adam_disc");
  step_ = checkpoint.meta.at("step").get<std::int64_t>();
}

// ------------------------------------------------------------------ IEGAN

IeganTrainer::IeganTrainer(TrainConfig config, std::vector<Tensor> clean_rgb,
                           std::vector<data::MaskMap> templates,
                           data::Degrader frozen_g)
    : config_(std::move(config)),
      clean_(std::move(clean_rgb)),
      templates_(std::move(templates)),
      degrade_(std::move(frozen_g)) {
  config_.validate();
  if (!degrade_) {
    fail(ErrorKind::Config, "editor training needs a frozen noise generator");
  }
  check_images(clean_, 3, config_.crop, "clean");
  for (const data::MaskMap& m : templates_) {
    if (m.values.shape().h < config_.crop || m.values.shape().w < config_.crop) {
      fail(ErrorKind::Data, "mask template smaller than the crop size");
    }
  }
  const auto& m = config_.model;
  c_ = std::make_unique<models::InpaintNet>("C", m.unet_width);
  r_ = std::make_unique<models::ColorNet>("R", m.unet_width);
  d_r_ = std::make_unique<models::EditCritic>("D_R", 3, m.critic_width);
  if (config_.ablation.train_inpaint_critic) {
    d_c_ = std::make_unique<models::EditCritic>("D_C", 1, m.critic_width);
  }
  std::uint64_t stream = kInitStream;
  for (models::Network* net : {static_cast<models::Network*>(c_.get()),
                               static_cast<models::Network*>(r_.get()),
                               static_cast<models::Network*>(d_r_.get()),
                               static_cast<models::Network*>(d_c_.get())}) {
    data::Rng rng = data::derive_rng(config_.seed, stream++, 0);
    if (net != nullptr) init_params(*net, rng);
  }
  vgg_ = make_perceptual_extractor(m.percep_width, config_.perceptual_weights);
  opt_c_ = make_adam(config_, params_of({c_.get()}), config_.stage1_lr);
  opt_r_ = make_adam(config_, params_of({r_.get()}), config_.stage1_lr);
  opt_d_ = make_adam(config_, params_of({d_r_.get(), d_c_.get()}), config_.stage1_lr);
}

int IeganTrainer::steps_per_epoch() const {
  if (config_.steps_per_epoch > 0) return config_.steps_per_epoch;
  return static_cast<int>((clean_.size() + config_.batch_size - 1) / config_.batch_size);
}

std::int64_t IeganTrainer::stage1_steps() const {
  return static_cast<std::int64_t>(config_.stage1_epochs) * steps_per_epoch();
}

std::int64_t IeganTrainer::total_steps() const {
  const std::int64_t stage2 = config_.ablation.joint_training
                                  ? static_cast<std::int64_t>(config_.stage2_epochs) *
                                        steps_per_epoch()
                                  : 0;
  return stage1_steps() + stage2;
}

int IeganTrainer::current_stage() const {
  return (config_.ablation.joint_training && step_ >= stage1_steps()) ? 2 : 1;
}

data::SampleBatch IeganTrainer::draw_batch() {
  data::Rng rng = data::derive_rng(config_.seed, kIeganDataStream, step_);
  const data::SampleConfig sc{config_.crop, config_.extra_noise_sigma,
                              config_.ablation.max_scribbles, config_.stroke_size};
  std::uniform_int_distribution<std::size_t> pick(0, clean_.size() - 1);
  std::vector<data::SamplePair> samples;
  samples.reserve(config_.batch_size);
  for (int b = 0; b < config_.batch_size; ++b) {
    samples.push_back(
        data::make_training_sample(clean_[pick(rng)], degrade_, templates_, sc, rng));
  }
  return data::stack_samples(samples);
}

StepLog IeganTrainer::step() {
  const int stage = current_stage();
  const double lr = stage == 1 ? config_.stage1_lr : config_.stage2_lr;
  opt_c_->set_lr(lr);
  opt_r_->set_lr(lr);
  opt_d_->set_lr(lr);
  const auto& ab = config_.ablation;

  const data::SampleBatch batch = draw_batch();
  const Var masked(batch.masked), mask(batch.mask), gray(batch.clean_gray);
  const Var color(batch.clean_color), hint(batch.hint), indicator(batch.indicator);

  StepLog log;
  log.step = step_;
  log.stage = stage;

  const Var y_hat = c_->forward(masked, mask);
  // Stage 1 feeds R the clean gray image; stage 2 chains C into R.
  Var r_input = gray;
  if (stage == 2) r_input = ab.joint_backprop ? y_hat : detach(y_hat);
  const Var z_hat = r_->forward(r_input, hint, indicator);

  const Mapping d_r = [&](const Var& v) { return d_r_->forward(v); };
  const Mapping d_c = [&](const Var& v) { return d_c_->forward(v); };
  if (ab.use_gan || d_c_) {
    opt_d_->zero_grad();
    std::vector<Var> critic_losses;
    if (ab.use_gan) {
      const Var ld = objectives::lsgan_d(d_r, color, detach(z_hat));
      log.terms["d_r"] = ld.item();
      critic_losses.push_back(ld);
    }
    if (d_c_) {
      const Var ld = objectives::lsgan_d(d_c, gray, detach(y_hat));
      log.terms["d_c"] = ld.item();
      critic_losses.push_back(ld);
    }
    backward(ops::weighted_sum(critic_losses,
                               std::vector<double>(critic_losses.size(), 1.0)));
    opt_d_->step();
  }

  d_r_->set_trainable(false);
  if (d_c_) d_c_->set_trainable(false);
  const Var l1c = objectives::l1(y_hat, gray);
  const Var l1r = objectives::l1(z_hat, color);
  Var lperc;
  if (ab.use_perceptual) {
    const Mapping phi = [this](const Var& v) { return vgg_->features(v); };
    lperc = objectives::l_perceptual(phi, z_hat, color);
  }
  Var lgr;
  if (ab.use_gan) lgr = objectives::lsgan_g(d_r, z_hat);
  Var total = objectives::l_iegan_total(config_.iegan, l1c, l1r, lperc, lgr);
  if (d_c_) {
    const Var lgc = objectives::lsgan_g(d_c, y_hat);
    log.terms["g_c"] = lgc.item();
    total = ops::weighted_sum({total, lgc}, {1.0, config_.iegan.lambda_g});
  }
  opt_c_->zero_grad();
  opt_r_->zero_grad();
  backward(total);
  opt_c_->step();
  opt_r_->step();
  d_r_->set_trainable(true);
  if (d_c_) d_c_->set_trainable(true);

  log.terms["l1_c"] = l1c.item();
  log.terms["l1_r"] = l1r.item();
  if (lperc.defined()) log.terms["percep_r"] = lperc.item();
  if (lgr.defined()) log.terms["g_r"] = lgr.item();
  log.terms["total"] = total.item();
  ++step_;
  return log;
}

std::vector<EpochLog> IeganTrainer::run(const EpochCallback& on_epoch) {
  std::vector<EpochLog> logs;
  const int spe = steps_per_epoch();
  const std::int64_t total = total_steps();
  for (std::int64_t e = step_ / spe; (e + 1) * spe <= total; ++e) {
    EpochAccumulator acc;
    int stage = current_stage();
    while (step_ < (e + 1) * spe) acc.add(step());
    logs.push_back(acc.finish(static_cast<int>(e) + 1, stage));
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

ckpt::Checkpoint IeganTrainer::checkpoint() const {
  ckpt::Checkpoint out;
  out.meta["kind"] = "iegan";
  out.meta["config"] = to_json(config_);
  out.meta["step"] = step_;
  out.meta["stage"] = current_stage();
  out.meta["epoch"] = step_ / steps_per_epoch();
  out.meta["rng"] = {{"engine", "mt19937_64"},
                     {"seed", config_.seed},
                     {"stream", kIeganDataStream},
                     {"next_step", step_}};
  out.meta["architecture_hash"] =
      combined_hash({c_.get(), r_.get(), d_r_.get(), d_c_.get()});
  for (const models::Network* net :
       {static_cast<const models::Network*>(c_.get()),
        static_cast<const models::Network*>(r_.get()),
        static_cast<const models::Network*>(d_r_.get()),
        static_cast<const models::Network*>(d_c_.get())}) {
    if (net != nullptr) ckpt::store_network(out, *net);
  }
  opt_c_->store(out, "adam_c");
  opt_r_->store(out, "adam_r");
  opt_d_->store(out, "adam_d");
  return out;
}

void IeganTrainer::restore(const ckpt::Checkpoint& checkpoint) {
  check_config_matches(checkpoint, config_, "iegan");
  for (models::Network* net :
       {static_cast<models::Network*>(c_.get()), static_cast<models::Network*>(r_.get()),
        static_cast<models::Network*>(d_r_.get()),
        static_cast<models::Network*>(d_c_.get())}) {
    if (net != nullptr) ckpt::restore_network(checkpoint, *net);
  }
  opt_c_->restore(checkpoint, "adam_c");
  opt_r_->restore(checkpoint, "adam_r");
  opt_d_->restore(checkpoint, "adam_d");
  step_ = checkpoint.meta.at("step").get<std::int64_t>();
}

// ------------------------------------------------------------------ helpers

data::Degrader degrader_from(std::shared_ptr<const models::NoiseGenerator> g) {
  if (!g) return {};
  return [g](const Tensor& gray) {
    NoGradGuard guard;
    return g->forward(Var(gray)).value();
  };
}

Tensor degrade_image(const models::NoiseGenerator& g, const Tensor& gray, int tile) {
  const Shape s = gray.shape();
  if (s.n != 1 || s.c != 1) fail(ErrorKind::Shape, "degrade_image expects (1, 1, H, W)");
  if (tile < 1) fail(ErrorKind::Value, "tile must be positive");
  // Borders of a tile only see zero padding where the full image would too,
  // because every interior edge carries `margin` pixels of real context.
  const int margin = g.receptive_radius();
  NoGradGuard guard;
  Tensor out(s);
  for (int y0 = 0; y0 < s.h; y0 += tile) {
    for (int x0 = 0; x0 < s.w; x0 += tile) {
      const int y1 = std::min(s.h, y0 + tile), x1 = std::min(s.w, x0 + tile);
      const int ty0 = std::max(0, y0 - margin), tx0 = std::max(0, x0 - margin);
      const int ty1 = std::min(s.h, y1 + margin), tx1 = std::min(s.w, x1 + margin);
      Tensor patch(Shape{1, 1, ty1 - ty0, tx1 - tx0});
      for (int y = ty0; y < ty1; ++y) {
        for (int x = tx0; x < tx1; ++x) patch.at(0, 0, y - ty0, x - tx0) = gray.at(0, 0, y, x);
      }
      const Tensor res = g.forward(Var(patch)).value();
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) out.at(0, 0, y, x) = res.at(0, 0, y - ty0, x - tx0);
      }
    }
  }
  return out;
}

std::shared_ptr<models::NoiseGenerator> load_noise_generator(
    const ckpt::Checkpoint& checkpoint) {
  if (checkpoint.meta.value("kind", "") != "negan") {
    fail(ErrorKind::Format, "not a noise-learner checkpoint");
  }
  const TrainConfig config = config_from_json(checkpoint.meta.at("config"));
  auto g = std::make_shared<models::NoiseGenerator>("G", config.model.negan_width,
                                                    config.model.negan_blocks);
  ckpt::restore_network(checkpoint, *g);
  g->set_trainable(false);
  return g;
}

std::unique_ptr<models::PerceptualExtractor> make_perceptual_extractor(
    int width, const std::string& weights_path) {
  auto vgg = std::make_unique<models::PerceptualExtractor>("vgg", width);
  if (weights_path.empty()) {
    data::Rng rng = data::derive_rng(kPerceptualSeed, 0, 0);
    init_params(*vgg, rng);
  } else {
    ckpt::restore_network(ckpt::load_checkpoint(weights_path), *vgg);
  }
  vgg->set_trainable(false);
  return vgg;
}

}  // namespace lped
