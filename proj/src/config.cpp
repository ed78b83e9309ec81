#include "lped/config.hpp"

#include <fstream>
#include <set>

#include "lped/error.hpp"

namespace lped {
namespace {

using nlohmann::json;

// Reads `key` from `j` into `out` if present, rejecting type mismatches.
template <typename T>
void read(const json& j, const char* key, T& out, std::set<std::string>& used) {
  if (!j.contains(key)) return;
  used.insert(key);
  try {
    const json& v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::runtime_error("expected boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::runtime_error("expected integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::runtime_error("expected number");
    } else {
      if (!v.is_string()) throw std::runtime_error("expected string");
    }
    out = v.get<T>();
  } catch (const std::exception& e) {
    fail(ErrorKind::Config, std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& used,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!used.count(key)) {
      fail(ErrorKind::Config, "unknown config key '" + where + key + "'");
    }
  }
}

const json& section(const json& j, const char* key, std::set<std::string>& used) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  used.insert(key);
  if (!j.at(key).is_object()) {
    fail(ErrorKind::Config, std::string("config key '") + key + "' must be an object");
  }
  return j.at(key);
}

}  // namespace

void TrainConfig::validate() const {
  // Zero freezes parameters, which the no-op invariance checks rely on.
  if (!(stage1_lr >= 0.0) || !(stage2_lr >= 0.0)) {
    fail(ErrorKind::Config, "learning rates must be >= 0");
  }
  if (stage1_epochs < 0 || stage2_epochs < 0) fail(ErrorKind::Config, "epochs must be >= 0");
  if (steps_per_epoch < 0) fail(ErrorKind::Config, "steps_per_epoch must be >= 0");
  if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be >= 1");
  if (crop < 16 || crop % 16 != 0) {
    fail(ErrorKind::Config, "crop must be a positive multiple of 16");
  }
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    fail(ErrorKind::Config, "Adam betas must lie in [0, 1)");
  }
  if (ablation.max_scribbles < 0) fail(ErrorKind::Config, "max_scribbles must be >= 0");
  if (extra_noise_sigma < 0.0) fail(ErrorKind::Config, "extra_noise_sigma must be >= 0");
  if (stroke_size < 1) fail(ErrorKind::Config, "stroke_size must be >= 1");
  const auto& m = model;
  if (m.negan_width < 1 || m.negan_blocks < 0 || m.disc_width < 1 ||
      m.unet_width < 1 || m.critic_width < 1 || m.percep_width < 1) {
    fail(ErrorKind::Config, "model widths must be positive");
  }
  negan.validate();
  iegan.validate();
}

TrainConfig full_profile() { return TrainConfig{}; }

TrainConfig desk_profile() {
  TrainConfig c;
  c.crop = 64;
  c.batch_size = 8;
  c.model.negan_width = 16;
  c.model.disc_width = 16;
  c.model.unet_width = 16;
  c.model.critic_width = 16;
  c.model.percep_width = 16;
  return c;
}

json to_json(const models::ModelConfig& m) {
  return json{{"negan_width", m.negan_width},   {"negan_blocks", m.negan_blocks},
              {"disc_width", m.disc_width},     {"unet_width", m.unet_width},
              {"critic_width", m.critic_width}, {"percep_width", m.percep_width}};
}

models::ModelConfig model_config_from_json(const json& j) {
  models::ModelConfig m;
  std::set<std::string> used;
  read(j, "negan_width", m.negan_width, used);
  read(j, "negan_blocks", m.negan_blocks, used);
  read(j, "disc_width", m.disc_width, used);
  read(j, "unet_width", m.unet_width, used);
  read(j, "critic_width", m.critic_width, used);
  read(j, "percep_width", m.percep_width, used);
  reject_unknown(j, used, "model.");
  return m;
}

json to_json(const TrainConfig& c) {
  const auto& a = c.ablation;
  return json{
      {"stage1_lr", c.stage1_lr},
      {"stage2_lr", c.stage2_lr},
      {"stage1_epochs", c.stage1_epochs},
      {"stage2_epochs", c.stage2_epochs},
      {"steps_per_epoch", c.steps_per_epoch},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"batch_size", c.batch_size},
      {"crop", c.crop},
      {"seed", c.seed},
      {"extra_noise_sigma", c.extra_noise_sigma},
      {"stroke_size", c.stroke_size},
      {"perceptual_weights", c.perceptual_weights},
      {"model", to_json(c.model)},
      {"losses",
       {{"lambda_low", c.negan.lambda_low},
        {"lambda_cycle", c.negan.lambda_cycle},
        {"lambda_percep", c.iegan.lambda_percep},
        {"lambda_g", c.iegan.lambda_g}}},
      {"ablation",
       {{"use_dwt_losses", a.use_dwt_losses},
        {"use_perceptual", a.use_perceptual},
        {"use_gan", a.use_gan},
        {"joint_training", a.joint_training},
        {"max_scribbles", a.max_scribbles},
        {"train_inpaint_critic", a.train_inpaint_critic},
        {"joint_backprop", a.joint_backprop}}},
  };
}

TrainConfig config_from_json(const json& j, TrainConfig base) {
  if (!j.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
  std::set<std::string> used;
  if (j.contains("profile")) {
    used.insert("profile");
    const json& p = j.at("profile");
    if (p == "desk") {
      base = desk_profile();
    } else if (p == "full") {
      base = full_profile();
    } else {
      fail(ErrorKind::Config, "profile must be \"desk\" or \"full\"");
    }
  }
  TrainConfig c = base;
  read(j, "stage1_lr", c.stage1_lr, used);
  read(j, "stage2_lr", c.stage2_lr, used);
  read(j, "stage1_epochs", c.stage1_epochs, used);
  read(j, "stage2_epochs", c.stage2_epochs, used);
  read(j, "steps_per_epoch", c.steps_per_epoch, used);
  read(j, "adam_beta1", c.adam_beta1, used);
  read(j, "adam_beta2", c.adam_beta2, used);
  read(j, "adam_eps", c.adam_eps, used);
  read(j, "batch_size", c.batch_size, used);
  read(j, "crop", c.crop, used);
  read(j, "seed", c.seed, used);
  read(j, "extra_noise_sigma", c.extra_noise_sigma, used);
  read(j, "stroke_size", c.stroke_size, used);
  read(j, "perceptual_weights", c.perceptual_weights, used);

  const json& model = section(j, "model", used);
  {
    std::set<std::string> u;
    read(model, "negan_width", c.model.negan_width, u);
    read(model, "negan_blocks", c.model.negan_blocks, u);
    read(model, "disc_width", c.model.disc_width, u);
    read(model, "unet_width", c.model.unet_width, u);
    read(model, "critic_width", c.model.critic_width, u);
    read(model, "percep_width", c.model.percep_width, u);
    reject_unknown(model, u, "model.");
  }
  const json& losses = section(j, "losses", used);
  {
    std::set<std::string> u;
    read(losses, "lambda_low", c.negan.lambda_low, u);
    read(losses, "lambda_cycle", c.negan.lambda_cycle, u);
    read(losses, "lambda_percep", c.iegan.lambda_percep, u);
    read(losses, "lambda_g", c.iegan.lambda_g, u);
    reject_unknown(losses, u, "losses.");
  }
  const json& ab = section(j, "ablation", used);
  {
    std::set<std::string> u;
    read(ab, "use_dwt_losses", c.ablation.use_dwt_losses, u);
    read(ab, "use_perceptual", c.ablation.use_perceptual, u);
    read(ab, "use_gan", c.ablation.use_gan, u);
    read(ab, "joint_training", c.ablation.joint_training, u);
    read(ab, "max_scribbles", c.ablation.max_scribbles, u);
    read(ab, "train_inpaint_critic", c.ablation.train_inpaint_critic, u);
    read(ab, "joint_backprop", c.ablation.joint_backprop, u);
    reject_unknown(ab, u, "ablation.");
  }
  reject_unknown(j, used, "");
  c.validate();
  return c;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "config file " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace lped
