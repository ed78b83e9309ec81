#include "lped/editor.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "lped/autograd.hpp"
#include "lped/checkpoint.hpp"
#include "lped/config.hpp"
#include "lped/error.hpp"
#include "lped/image_io.hpp"

namespace lped::editor {
namespace {

constexpr int kStride = 16;

int round_up(int v, int m) { return (v + m - 1) / m * m; }

// Mirror index into [0, n) without repeating the edge sample.
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

void check_spatial(const Tensor& t, const Shape& ref, int channels, const char* what) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != channels || s.h != ref.h || s.w != ref.w) {
    fail(ErrorKind::Shape, std::string(what) + " has shape " + s.str() + ", expected (1, " +
                               std::to_string(channels) + ", " + std::to_string(ref.h) +
                               ", " + std::to_string(ref.w) + ")");
  }
}

std::vector<double> gaussian_window() {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  std::vector<double> w(kSize);
  double total = 0.0;
  for (int i = 0; i < kSize; ++i) {
    const double d = i - kSize / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable valid-mode filter of one h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& k) {
  const int r = static_cast<int>(k.size());
  const int oh = h - r + 1;
  const int ow = w - r + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < r; ++t) acc += k[t] * plane[y * w + x + t];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < r; ++t) acc += k[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

double ssim_plane(const double* a, const double* b, int h, int w) {
  static const std::vector<double> k = gaussian_window();
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> pa(a, a + n), pb(b, b + n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(pa, h, w, k);
  const auto mu_b = filter_valid(pb, h, w, k);
  const auto e_aa = filter_valid(aa, h, w, k);
  const auto e_bb = filter_valid(bb, h, w, k);
  const auto e_ab = filter_valid(ab, h, w, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2.0 * mu_a[i] * mu_b[i] + C1) * (2.0 * cov + C2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2));
  }
  return total / static_cast<double>(mu_a.size());
}

std::string file_id(const std::filesystem::path& path) {
  return path.filename().string();
}

double mean_of(const std::vector<ImageScore>& scores, double ImageScore::*field) {
  double total = 0.0;
  for (const ImageScore& s : scores) total += s.*field;
  return total / static_cast<double>(scores.size());
}

std::string fmt_metric(double v, int precision) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

Tensor NetworkInpainter::inpaint(const Tensor& masked, const Tensor& mask) const {
  NoGradGuard guard;
  return net_->forward(Var(masked), Var(mask)).value();
}

Tensor NetworkColorizer::colorize(const Tensor& gray, const Tensor& hint,
                                  const Tensor& indicator) const {
  NoGradGuard guard;
  return net_->forward(Var(gray), Var(hint), Var(indicator)).value();
}

LoadedModels load_models(const std::filesystem::path& checkpoint_c,
                         const std::filesystem::path& checkpoint_r) {
  const ckpt::Checkpoint cc = ckpt::load_checkpoint(checkpoint_c);
  const ckpt::Checkpoint rc =
      checkpoint_r == checkpoint_c ? cc : ckpt::load_checkpoint(checkpoint_r);
  auto width_of = [](const ckpt::Checkpoint& c, const std::filesystem::path& p) {
    if (!c.meta.contains("config")) {
      fail(ErrorKind::Format, p.string() + " carries no config snapshot");
    }
    return config_from_json(c.meta.at("config")).model.unet_width;
  };
  auto c_net = std::make_shared<models::InpaintNet>("C", width_of(cc, checkpoint_c));
  auto r_net = std::make_shared<models::ColorNet>("R", width_of(rc, checkpoint_r));
  ckpt::restore_network(cc, *c_net);
  ckpt::restore_network(rc, *r_net);
  c_net->set_trainable(false);
  r_net->set_trainable(false);

  LoadedModels out;
  out.c = std::make_shared<NetworkInpainter>(c_net);
  out.r = std::make_shared<NetworkColorizer>(r_net);
  auto describe = [](const ckpt::Checkpoint& c, const std::filesystem::path& p,
                     const models::Network& net) {
    return nlohmann::json{
        {"id", file_id(p)},
        {"path", p.string()},
        {"network", net.name()},
        {"network_hash", ckpt::hex64(net.architecture_hash())},
        {"architecture_hash", c.meta.value("architecture_hash", "")},
        {"step", c.meta.value("step", 0)},
        {"config", c.meta.at("config")}};
  };
  out.meta = {{"C", describe(cc, checkpoint_c, *c_net)},
              {"R", describe(rc, checkpoint_r, *r_net)}};
  out.checkpoint_ids = {file_id(checkpoint_c), file_id(checkpoint_r)};
  return out;
}

Tensor pad_reflect(const Tensor& image, int height, int width) {
  const Shape s = image.shape();
  if (height < s.h || width < s.w) fail(ErrorKind::Value, "pad target smaller than image");
  Tensor out(Shape{s.n, s.c, height, width});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < height; ++y) {
        const int sy = reflect(y, s.h);
        for (int x = 0; x < width; ++x) out.at(n, c, y, x) = image.at(n, c, sy, reflect(x, s.w));
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& image, int height, int width) {
  const Shape s = image.shape();
  if (height > s.h || width > s.w) fail(ErrorKind::Value, "crop larger than image");
  Tensor out(Shape{s.n, s.c, height, width});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out.at(n, c, y, x) = image.at(n, c, y, x);
      }
    }
  }
  return out;
}

Tensor edit(const EditRequest& request, const Inpainter* c, const Colorizer* r) {
  if (c == nullptr || r == nullptr) fail(ErrorKind::State, "editor models are not loaded");
  const Shape s = request.gray.shape();
  check_spatial(request.gray, s, 1, "gray");
  check_spatial(request.mask.values, s, 1, "mask");
  check_spatial(request.scribbles.hint, s, 3, "scribble hint");
  check_spatial(request.scribbles.indicator, s, 1, "scribble indicator");

  const int ph = round_up(s.h, kStride);
  const int pw = round_up(s.w, kStride);
  const Tensor gray = pad_reflect(request.gray, ph, pw);
  const Tensor mask = pad_reflect(request.mask.values, ph, pw);
  const Tensor hint = pad_reflect(request.scribbles.hint, ph, pw);
  const Tensor indicator = pad_reflect(request.scribbles.indicator, ph, pw);

  Tensor masked = gray;
  for (std::size_t i = 0; i < masked.size(); ++i) masked[i] *= mask[i];
  const Tensor restored = c->inpaint(masked, mask);
  const Tensor color = r->colorize(restored, hint, indicator);
  if (color.shape() != Shape{1, 3, ph, pw}) {
    fail(ErrorKind::Shape, "colorizer returned " + color.shape().str());
  }
  return crop(color, s.h, s.w);
}

double psnr(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(sse / static_cast<double>(a.size()));
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  const Shape s = a.shape();
  if (s.h < 11 || s.w < 11) {
    fail(ErrorKind::Shape, "ssim needs images of at least 11x11, got " + s.str());
  }
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      total += ssim_plane(a.plane(n, c), b.plane(n, c), s.h, s.w);
    }
  }
  return total / (static_cast<double>(s.n) * s.c);
}

nlohmann::json metric_json(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

nlohmann::json to_json(const EvalConfig& config) {
  return {{"size", config.size},
          {"sigma", config.sigma},
          {"scribbles", config.scribbles},
          {"stroke_size", config.stroke_size},
          {"seed", config.seed},
          {"masks", config.masks_dir.empty() ? "pseudo" : config.masks_dir.string()}};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const ImageScore& s : per_image) {
    rows.push_back({{"id", s.id}, {"psnr", metric_json(s.psnr)}, {"ssim", s.ssim}});
  }
  return {{"config", config},
          {"per_image", rows},
          {"mean_psnr", metric_json(mean_psnr)},
          {"mean_ssim", mean_ssim},
          {"reference",
           {{"psnr", kReferencePsnr},
            {"ssim", kReferenceSsim},
            {"note", "full-scale figures, not reproducible at desk scale"}}}};
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << "Method              | Guidance    | PSNR    | SSIM\n";
  os << "--------------------+-------------+---------+-------\n";
  os << "Reference (full)    | mask, color | " << fmt_metric(kReferencePsnr, 2)
     << "   | " << fmt_metric(kReferenceSsim, 4) << "\n";
  os << "Proposed (this run) | mask, color | " << std::left << std::setw(7)
     << fmt_metric(mean_psnr, 2) << " | " << fmt_metric(mean_ssim, 4) << "\n";
  os << "(" << per_image.size() << " images, " << config.value("scribbles", 0)
     << " scribbles, sigma " << config.value("sigma", 0.0) << ")\n";
  return os.str();
}

EvalReport evaluate(const data::ImageFolder& images, const Inpainter& c,
                    const Colorizer& r, const EvalConfig& config) {
  if (images.images.empty()) fail(ErrorKind::Config, "evaluation dataset is empty");
  if (config.size < 16 || config.scribbles < 0 || config.sigma < 0.0 ||
      config.stroke_size < 1) {
    fail(ErrorKind::Config, "invalid evaluation settings");
  }
  std::vector<data::MaskMap> templates;
  if (!config.masks_dir.empty()) {
    templates = data::load_mask_templates(config.masks_dir, config.size);
    if (templates.empty()) fail(ErrorKind::Config, "no usable mask templates");
  }
  EvalReport report;
  report.config = to_json(config);
  for (std::size_t i = 0; i < images.images.size(); ++i) {
    data::Rng rng = data::derive_rng(config.seed, 0, i);
    Tensor color = io::resize_center_crop(images.images[i], config.size);
    if (color.shape().c != 3) {
      fail(ErrorKind::Shape, "evaluation images must be RGB, got " + color.shape().str());
    }
    const Tensor gray = data::to_grayscale(color);
    const data::MaskMap mask =
        templates.empty() ? data::pseudo_crack_mask(config.size, config.size, rng)
                          : data::crop_mask_template(templates, config.size, rng);
    EditRequest req{data::add_gaussian_noise(gray, config.sigma, rng), mask,
                    data::sample_scribbles(color, config.scribbles, config.stroke_size, rng)};
    const Tensor out = edit(req, &c, &r);
    const std::string id = i < images.ids.size() ? images.ids[i] : std::to_string(i);
    report.per_image.push_back({id, psnr(out, color), ssim(out, color)});
  }
  report.mean_psnr = mean_of(report.per_image, &ImageScore::psnr);
  report.mean_ssim = mean_of(report.per_image, &ImageScore::ssim);
  return report;
}

EvalReport evaluate(const std::filesystem::path& dataset_dir, const Inpainter& c,
                    const Colorizer& r, const EvalConfig& config) {
  const data::ImageFolder folder = data::load_folder(dataset_dir, 3, 1);
  if (folder.images.empty()) {
    fail(ErrorKind::Config, "no images in evaluation dataset " + dataset_dir.string());
  }
  return evaluate(folder, c, r, config);
}

}  // namespace lped::editor
