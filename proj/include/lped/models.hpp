#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lped/autograd.hpp"

namespace lped::models {

using NamedVar = std::pair<std::string, Var>;

// Owns the named parameters and buffers of one network. Layers register
// themselves under slash-separated paths, e.g. "enc1/feature/weight".
class Network {
 public:
  explicit Network(std::string name) : name_(std::move(name)) {}
  virtual ~Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const std::string& name() const { return name_; }
  const std::vector<NamedVar>& parameters() const { return params_; }
  // Non-trainable state (spectral-norm singular-vector estimates).
  const std::vector<NamedVar>& buffers() const { return buffers_; }
  // Parameters that initialisation must zero instead of drawing Xavier.
  const std::set<std::string>& zero_init() const { return zero_init_; }

  // FNV-1a over the sorted (name, shape) list of parameters.
  std::uint64_t architecture_hash() const;
  std::size_t parameter_count() const;

  void set_trainable(bool trainable);
  void zero_grad();

  Var register_param(const std::string& path, Shape shape);
  Var register_buffer(const std::string& path, Shape shape);
  void mark_zero_init(const std::string& path) { zero_init_.insert(path); }

 private:
  std::string name_;
  std::vector<NamedVar> params_;
  std::vector<NamedVar> buffers_;
  std::set<std::string> zero_init_;
};

std::uint64_t architecture_hash(const std::vector<std::pair<std::string, Shape>>& entries);

// ---------------------------------------------------------------- layers

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Network& net, const std::string& path, int in, int out, int kernel,
         int stride, int padding, bool bias = true);
  Var operator()(const Var& x) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  const std::string& path() const { return path_; }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }

 private:
  std::string path_;
  int in_ = 0;
  int out_ = 0;
  int stride_ = 1;
  int padding_ = 0;
  Var weight_;
  Var bias_;
};

// Power-iteration state for one weight viewed as (out, in*k*k).
struct SpectralState {
  std::vector<double> u;
  std::vector<double> v;
};

// Runs `iterations` rounds of v <- W^T u / |W^T u|, u <- W v / |W v| and
// returns sigma = u^T W v. Norms are floored at 1e-12.
double power_iteration(const Tensor& weight, SpectralState& state,
                       int iterations);

// weight / sigma_hat after `iterations` (>= 1) power-iteration steps; the
// state is updated in place. sigma_hat is floored at 1e-12.
Tensor spectral_normalize(const Tensor& weight, SpectralState& state,
                          int iterations);

class SNConv2d {
 public:
  SNConv2d() = default;
  SNConv2d(Network& net, const std::string& path, int in, int out, int kernel,
           int stride, int padding);
  // With `update`, one power-iteration step refreshes u, v before use.
  Var operator()(const Var& x, bool update) const;
  // Normalised kernel as used by the last/next forward.
  Var normalized_weight(bool update) const;
  double sigma() const;

 private:
  Conv2d conv_;
  Var u_;
  Var v_;
  int stride_ = 1;
  int padding_ = 0;
};

enum class Activation { LeakyReLU, Linear };

// act(norm?(conv_f(x))) * sigmoid(conv_g(x)).
class GatedConv2d {
 public:
  GatedConv2d() = default;
  GatedConv2d(Network& net, const std::string& path, int in, int out,
              int kernel, int stride, int padding, bool norm,
              Activation act = Activation::LeakyReLU);
  Var operator()(const Var& x) const;

  const Conv2d& feature() const { return feature_; }
  const Conv2d& gate() const { return gate_; }

 private:
  Conv2d feature_;
  Conv2d gate_;
  bool norm_ = false;
  Activation act_ = Activation::LeakyReLU;
};

// x + conv2(lrelu(conv1(x))), no normalisation.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(Network& net, const std::string& path, int width);
  Var operator()(const Var& x) const;

 private:
  Conv2d conv1_;
  Conv2d conv2_;
};

// conv -> optional instance norm -> LeakyReLU(0.2).
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(Network& net, const std::string& path, int in, int out, int stride,
            bool norm);
  Var operator()(const Var& x) const;

 private:
  Conv2d conv_;
  bool norm_ = true;
};

// ---------------------------------------------------------------- networks

struct ModelConfig {
  int negan_width = 64;
  int negan_blocks = 8;
  int disc_width = 64;
  int unet_width = 64;     // encoder widths w, 2w, 4w, 8w
  int critic_width = 64;   // VGG-16 style widths w, 2w, 4w, 8w, 8w
  int percep_width = 64;   // 64 matches pretrained VGG-16 weights

  bool operator==(const ModelConfig&) const = default;
};

// Clean-to-noisy (G) or noisy-to-clean (F) translator: eight residual blocks
// at full resolution and a global skip. The output projection is
// zero-initialised, so a fresh generator is the identity map.
class NoiseGenerator : public Network {
 public:
  NoiseGenerator(std::string name, int width, int blocks);
  Var forward(const Var& x) const;
  // Pixels of context each output pixel depends on, per side.
  int receptive_radius() const { return 2 * static_cast<int>(blocks_.size()) + 2; }

 private:
  Conv2d head_;
  std::vector<ResidualBlock> blocks_;
  Conv2d tail_;
};

// Spectral-normalised PatchGAN with an overall stride of 8: three stride-2
// 4x4 convolutions then two stride-1 3x3 convolutions with a linear output.
// On the 128x128 Haar detail stack of a 256x256 image it yields 16x16 scores.
class PatchDiscriminator : public Network {
 public:
  PatchDiscriminator(std::string name, int in_channels, int width);
  Var forward(const Var& x, bool update_sigma) const;
  int in_channels() const { return in_channels_; }

 private:
  int in_channels_;
  std::vector<SNConv2d> layers_;
};

// Depth-4 U-Net (input downsampled x16). Channel plan w, 2w, 4w, 8w, 8w
// with skip concatenations, sigmoid output.
template <typename Block>
class UNetBody {
 public:
  UNetBody() = default;
  std::vector<Block> enc;   // 10 blocks: 2 per level, 5 levels
  std::vector<Block> dec;   // 4 blocks, deepest first
};

class InpaintNet : public Network {
 public:
  InpaintNet(std::string name, int width);
  // masked: (N,1,H,W) noisy gray already multiplied by mask; mask: (N,1,H,W).
  Var forward(const Var& masked, const Var& mask) const;

 private:
  UNetBody<GatedConv2d> body_;
  GatedConv2d out_;
};

class ColorNet : public Network {
 public:
  ColorNet(std::string name, int width);
  // gray (N,1,H,W), hint (N,3,H,W), indicator (N,1,H,W) -> (N,3,H,W).
  Var forward(const Var& gray, const Var& hint, const Var& indicator) const;

 private:
  UNetBody<ConvBlock> body_;
  Conv2d out_;
};

// Convolution part of a VGG-16 (blocks of 2,2,3,3,3 convs, 2x2 max pooling
// between blocks) with instance norm, LeakyReLU and a 1-channel linear head.
class EditCritic : public Network {
 public:
  EditCritic(std::string name, int in_channels, int width);
  Var forward(const Var& image) const;
  int in_channels() const { return in_channels_; }

 private:
  int in_channels_;
  std::vector<std::vector<ConvBlock>> stages_;
  Conv2d head_;
};

// Frozen VGG-16 trunk up to conv4_3. Parameters never require grad, but
// gradients flow to the input.
class PerceptualExtractor : public Network {
 public:
  PerceptualExtractor(std::string name, int width);
  // rgb: (N,3,H,W) -> conv4_3 feature maps (N,8w,H/8,W/8).
  Var features(const Var& rgb) const;

 private:
  std::vector<std::vector<Conv2d>> stages_;
};

// Shape helpers shared by the networks.
void require_channels(const Var& x, int channels, const char* tensor_name);
void require_multiple(const Var& x, int multiple, const char* tensor_name);

}  // namespace lped::models
