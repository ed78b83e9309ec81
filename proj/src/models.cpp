#include "lped/models.hpp"

#include <algorithm>
#include <cmath>

#include "lped/error.hpp"
#include "lped/ops.hpp"

namespace lped::models {
namespace {

constexpr double kSlope = 0.2;

double norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void normalize(std::vector<double>& x) {
  const double n = std::max(norm(x), 1e-12);
  for (double& v : x) v /= n;
}

// Encoder/decoder traversal shared by both U-Nets. `enc` holds two blocks per
// level for five levels, the first of each level (except level 0) strided.
template <typename Block>
Var unet_forward(const UNetBody<Block>& body, const Var& input) {
  std::vector<Var> skips;
  Var h = input;
  for (int level = 0; level < 5; ++level) {
    h = body.enc[2 * level](h);
    h = body.enc[2 * level + 1](h);
    if (level < 4) skips.push_back(h);
  }
  for (int i = 0; i < 4; ++i) {
    h = ops::upsample_nearest2x(h);
    h = ops::concat_channels(h, skips[3 - i]);
    h = body.dec[i](h);
  }
  return h;
}

int level_width(int width, int level) {
  static constexpr int kMul[5] = {1, 2, 4, 8, 8};
  return width * kMul[level];
}

template <typename Block, typename Make>
UNetBody<Block> build_unet(int in_channels, int width, Make make) {
  UNetBody<Block> body;
  int prev = in_channels;
  for (int level = 0; level < 5; ++level) {
    const int w = level_width(width, level);
    const std::string p = "enc" + std::to_string(level);
    body.enc.push_back(make(p + "a", prev, w, level == 0 ? 1 : 2, level != 0));
    body.enc.push_back(make(p + "b", w, w, 1, true));
    prev = w;
  }
  // dec i joins the upsampled deeper path with encoder level 3 - i.
  for (int i = 0; i < 4; ++i) {
    const int skip_level = 3 - i;
    const int in = prev + level_width(width, skip_level);
    const int out = skip_level == 0 ? width : level_width(width, skip_level - 1);
    body.dec.push_back(
        make("dec" + std::to_string(skip_level), in, out, 1, true));
    prev = out;
  }
  return body;
}

}  // namespace

// ---------------------------------------------------------------- Network

std::uint64_t architecture_hash(
    const std::vector<std::pair<std::string, Shape>>& entries) {
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, shape] : sorted) {
    mix(name);
    mix(":" + shape.str() + ";");
  }
  return h;
}

std::uint64_t Network::architecture_hash() const {
  std::vector<std::pair<std::string, Shape>> entries;
  for (const auto& [name, var] : params_) entries.emplace_back(name, var.shape());
  return models::architecture_hash(entries);
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, var] : params_) n += var.value().size();
  return n;
}

void Network::set_trainable(bool trainable) {
  for (auto& [name, var] : params_) var.node()->requires_grad = trainable;
}

void Network::zero_grad() {
  for (auto& [name, var] : params_) var.zero_grad();
}

Var Network::register_param(const std::string& path, Shape shape) {
  Var v(Tensor(shape, 0.0), true);
  params_.emplace_back(name_ + "/" + path, v);
  return v;
}

Var Network::register_buffer(const std::string& path, Shape shape) {
  Var v(Tensor(shape, 0.0), false);
  buffers_.emplace_back(name_ + "/" + path, v);
  return v;
}

void require_channels(const Var& x, int channels, const char* tensor_name) {
  if (x.shape().c != channels) {
    fail(ErrorKind::Shape, std::string(tensor_name) + " has " +
                               std::to_string(x.shape().c) +
                               " channels, expected " + std::to_string(channels));
  }
}

void require_multiple(const Var& x, int multiple, const char* tensor_name) {
  if (x.shape().h % multiple != 0 || x.shape().w % multiple != 0) {
    fail(ErrorKind::Dimension,
         std::string(tensor_name) + " spatial size " +
             std::to_string(x.shape().h) + "x" + std::to_string(x.shape().w) +
             " is not a multiple of " + std::to_string(multiple));
  }
}

// ---------------------------------------------------------------- layers

Conv2d::Conv2d(Network& net, const std::string& path, int in, int out,
               int kernel, int stride, int padding, bool bias)
    : path_(path), in_(in), out_(out), stride_(stride), padding_(padding) {
  weight_ = net.register_param(path + "/weight", Shape{out, in, kernel, kernel});
  if (bias) bias_ = net.register_param(path + "/bias", Shape{1, out, 1, 1});
}

Var Conv2d::operator()(const Var& x) const {
  return ops::conv2d(x, weight_, bias_, stride_, padding_);
}

double power_iteration(const Tensor& weight, SpectralState& state,
                       int iterations) {
  const int rows = weight.shape().n;
  const int cols = static_cast<int>(weight.size() / rows);
  if (static_cast<int>(state.u.size()) != rows ||
      static_cast<int>(state.v.size()) != cols) {
    fail(ErrorKind::Shape, "power_iteration: state does not match weight " +
                               weight.shape().str());
  }
  const double* w = weight.data();
  for (int it = 0; it < iterations; ++it) {
    std::fill(state.v.begin(), state.v.end(), 0.0);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) state.v[c] += w[r * cols + c] * state.u[r];
    }
    normalize(state.v);
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < cols; ++c) s += w[r * cols + c] * state.v[c];
      state.u[r] = s;
    }
    normalize(state.u);
  }
  double sigma = 0.0;
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += w[r * cols + c] * state.v[c];
    sigma += state.u[r] * s;
  }
  return sigma;
}

Tensor spectral_normalize(const Tensor& weight, SpectralState& state,
                          int iterations) {
  if (iterations < 1) fail(ErrorKind::Value, "spectral_normalize: iterations < 1");
  power_iteration(weight, state, iterations);
  NoGradGuard guard;
  return ops::spectral_normalize(Var(weight), state.u, state.v).value();
}

SNConv2d::SNConv2d(Network& net, const std::string& path, int in, int out,
                   int kernel, int stride, int padding)
    : conv_(net, path, in, out, kernel, stride, padding),
      stride_(stride),
      padding_(padding) {
  u_ = net.register_buffer(path + "/sn_u", Shape{1, 1, 1, out});
  v_ = net.register_buffer(path + "/sn_v", Shape{1, 1, 1, in * kernel * kernel});
}

Var SNConv2d::normalized_weight(bool update) const {
  if (update) {
    SpectralState state{u_.value().storage(), v_.value().storage()};
    power_iteration(conv_.weight().value(), state, 1);
    Var u = u_;
    Var v = v_;
    u.mutable_value().storage() = std::move(state.u);
    v.mutable_value().storage() = std::move(state.v);
  }
  return ops::spectral_normalize(conv_.weight(), u_.value().storage(),
                                 v_.value().storage());
}

Var SNConv2d::operator()(const Var& x, bool update) const {
  return ops::conv2d(x, normalized_weight(update), conv_.bias(), stride_, padding_);
}

double SNConv2d::sigma() const {
  SpectralState state{u_.value().storage(), v_.value().storage()};
  return power_iteration(conv_.weight().value(), state, 0);
}

GatedConv2d::GatedConv2d(Network& net, const std::string& path, int in,
                         int out, int kernel, int stride, int padding,
                         bool norm, Activation act)
    : feature_(net, path + "/feature", in, out, kernel, stride, padding),
      gate_(net, path + "/gate", in, out, kernel, stride, padding),
      norm_(norm),
      act_(act) {}

Var GatedConv2d::operator()(const Var& x) const {
  if (x.shape().c != feature_.in_channels()) {
    fail(ErrorKind::Shape, "gated conv " + feature_.path() + ": input has " +
                               std::to_string(x.shape().c) +
                               " channels, expected " +
                               std::to_string(feature_.in_channels()));
  }
  Var f = feature_(x);
  if (norm_) f = ops::instance_norm(f);
  if (act_ == Activation::LeakyReLU) f = ops::leaky_relu(f, kSlope);
  return ops::mul(f, ops::sigmoid(gate_(x)));
}

ResidualBlock::ResidualBlock(Network& net, const std::string& path, int width)
    : conv1_(net, path + "/conv1", width, width, 3, 1, 1),
      conv2_(net, path + "/conv2", width, width, 3, 1, 1) {}

Var ResidualBlock::operator()(const Var& x) const {
  return ops::add(x, conv2_(ops::leaky_relu(conv1_(x), kSlope)));
}

ConvBlock::ConvBlock(Network& net, const std::string& path, int in, int out,
                     int stride, bool norm)
    : conv_(net, path, in, out, 3, stride, 1), norm_(norm) {}

Var ConvBlock::operator()(const Var& x) const {
  Var h = conv_(x);
  if (norm_) h = ops::instance_norm(h);
  return ops::leaky_relu(h, kSlope);
}

// ---------------------------------------------------------------- networks

NoiseGenerator::NoiseGenerator(std::string name, int width, int blocks)
    : Network(std::move(name)),
      head_(*this, "head", 1, width, 3, 1, 1),
      tail_() {
  for (int i = 0; i < blocks; ++i) {
    blocks_.emplace_back(*this, "res" + std::to_string(i), width);
  }
  tail_ = Conv2d(*this, "tail", width, 1, 3, 1, 1);
  mark_zero_init(this->name() + "/tail/weight");
}

Var NoiseGenerator::forward(const Var& x) const {
  require_channels(x, 1, "noise generator input");
  Var h = ops::leaky_relu(head_(x), kSlope);
  for (const ResidualBlock& block : blocks_) h = block(h);
  return ops::add(x, tail_(h));
}

PatchDiscriminator::PatchDiscriminator(std::string name, int in_channels,
                                       int width)
    : Network(std::move(name)), in_channels_(in_channels) {
  layers_.emplace_back(*this, "conv0", in_channels, width, 4, 2, 1);
  layers_.emplace_back(*this, "conv1", width, 2 * width, 4, 2, 1);
  layers_.emplace_back(*this, "conv2", 2 * width, 4 * width, 4, 2, 1);
  layers_.emplace_back(*this, "conv3", 4 * width, 4 * width, 3, 1, 1);
  layers_.emplace_back(*this, "score", 4 * width, 1, 3, 1, 1);
}

Var PatchDiscriminator::forward(const Var& x, bool update_sigma) const {
  require_channels(x, in_channels_, "discriminator input");
  require_multiple(x, 8, "discriminator input");
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h, update_sigma);
    if (i + 1 < layers_.size()) h = ops::leaky_relu(h, kSlope);
  }
  return h;
}

InpaintNet::InpaintNet(std::string name, int width) : Network(std::move(name)) {
  body_ = build_unet<GatedConv2d>(
      2, width, [this](const std::string& path, int in, int out, int stride,
                       bool norm) {
        return GatedConv2d(*this, path, in, out, 3, stride, 1, norm);
      });
  out_ = GatedConv2d(*this, "out", width, 1, 3, 1, 1, false, Activation::Linear);
}

Var InpaintNet::forward(const Var& masked, const Var& mask) const {
  require_channels(masked, 1, "masked image");
  require_channels(mask, 1, "mask");
  require_same_shape(masked.shape(), mask.shape(), "inpaint: mask");
  require_multiple(masked, 16, "masked image");
  Var h = unet_forward(body_, ops::concat_channels(masked, mask));
  return ops::sigmoid(out_(h));
}

ColorNet::ColorNet(std::string name, int width) : Network(std::move(name)) {
  body_ = build_unet<ConvBlock>(
      5, width, [this](const std::string& path, int in, int out, int stride,
                       bool norm) {
        return ConvBlock(*this, path, in, out, stride, norm);
      });
  out_ = Conv2d(*this, "out", width, 3, 3, 1, 1);
}

Var ColorNet::forward(const Var& gray, const Var& hint,
                      const Var& indicator) const {
  require_channels(gray, 1, "gray image");
  require_channels(hint, 3, "scribble hint");
  require_channels(indicator, 1, "scribble indicator");
  require_same_shape(gray.shape(), indicator.shape(), "colorize: indicator");
  require_multiple(gray, 16, "gray image");
  Var in = ops::concat_channels(ops::concat_channels(gray, hint), indicator);
  return ops::sigmoid(out_(unet_forward(body_, in)));
}

EditCritic::EditCritic(std::string name, int in_channels, int width)
    : Network(std::move(name)), in_channels_(in_channels) {
  static constexpr int kConvs[5] = {2, 2, 3, 3, 3};
  int prev = in_channels;
  for (int s = 0; s < 5; ++s) {
    std::vector<ConvBlock> stage;
    const int w = level_width(width, s);
    for (int i = 0; i < kConvs[s]; ++i) {
      const std::string path =
          "conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1);
      stage.emplace_back(*this, path, prev, w, 1, !(s == 0 && i == 0));
      prev = w;
    }
    stages_.push_back(std::move(stage));
  }
  head_ = Conv2d(*this, "score", prev, 1, 3, 1, 1);
}

Var EditCritic::forward(const Var& image) const {
  require_channels(image, in_channels_, "critic input");
  require_multiple(image, 16, "critic input");
  Var h = image;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (s > 0) h = ops::max_pool2x(h);
    for (const ConvBlock& block : stages_[s]) h = block(h);
  }
  return head_(h);
}

PerceptualExtractor::PerceptualExtractor(std::string name, int width)
    : Network(std::move(name)) {
  static constexpr int kConvs[4] = {2, 2, 3, 3};
  int prev = 3;
  for (int s = 0; s < 4; ++s) {
    std::vector<Conv2d> stage;
    const int w = level_width(width, s);
    for (int i = 0; i < kConvs[s]; ++i) {
      const std::string path =
          "conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1);
      stage.emplace_back(*this, path, prev, w, 3, 1, 1);
      prev = w;
    }
    stages_.push_back(std::move(stage));
  }
  set_trainable(false);
}

Var PerceptualExtractor::features(const Var& rgb) const {
  require_channels(rgb, 3, "perceptual input");
  require_multiple(rgb, 8, "perceptual input");
  Var h = rgb;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (s > 0) h = ops::max_pool2x(h);
    for (std::size_t i = 0; i < stages_[s].size(); ++i) {
      h = stages_[s][i](h);
      const bool last = s + 1 == stages_.size() && i + 1 == stages_[s].size();
      if (!last) h = ops::relu(h);
    }
  }
  return h;
}

}  // namespace lped::models
