// Acceptance run: one PASS/FAIL line per criterion. Unit-test sources are
// linked in and re-run through doctest filters where they already hold the
// oracles; the training criteria run here directly.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lped/checkpoint.hpp"
#include "lped/editor.hpp"
#include "lped/models.hpp"
#include "lped/objectives.hpp"
#include "lped/ops.hpp"
#include "lped/trainer.hpp"
#include "lped/wavelet.hpp"
#include "support/testing.hpp"

using namespace lped;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

// Counts the test cases doctest starts, so an empty filter cannot pass.
int g_cases_run = 0;

struct CaseCounter : doctest::IReporter {
  explicit CaseCounter(const doctest::ContextOptions&) {}
  void report_query(const doctest::QueryData&) override {}
  void test_run_start() override {}
  void test_run_end(const doctest::TestRunStats&) override {}
  void test_case_start(const doctest::TestCaseData&) override { ++g_cases_run; }
  void test_case_reenter(const doctest::TestCaseData&) override {}
  void test_case_end(const doctest::CurrentTestCaseStats&) override {}
  void test_case_exception(const doctest::TestCaseException&) override {}
  void subcase_start(const doctest::SubcaseSignature&) override {}
  void subcase_end() override {}
  void log_assert(const doctest::AssertData&) override {}
  void log_message(const doctest::MessageData&) override {}
  void test_case_skipped(const doctest::TestCaseData&) override {}
};

REGISTER_LISTENER("case_counter", 1, CaseCounter);

// Runs the linked doctest cases matching the filters; true when at least one
// ran and all passed.
bool run_cases(const char* files, const char* cases, const char* exclude = nullptr,
               const char* subcases = nullptr) {
  doctest::Context ctx;
  ctx.setOption("minimal", true);
  ctx.setOption("no-version", true);
  ctx.setOption("source-file", files);
  if (cases) ctx.setOption("test-case", cases);
  if (exclude) ctx.setOption("test-case-exclude", exclude);
  if (subcases) ctx.setOption("subcase", subcases);
  std::fflush(stdout);
  g_cases_run = 0;
  const int failed = ctx.run();
  std::fflush(stdout);
  std::fprintf(stderr, "[%d test cases]\n", g_cases_run);
  return failed == 0 && g_cases_run > 0;
}

const char* kGradientCases = "*finite differences*,*gradient*";

// ---- wavelet

Outcome wavelet_suite() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> half(1, 64);
  std::uniform_int_distribution<int> channels(1, 3);
  double round_trip = 0.0;
  double parseval = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Shape s{1, channels(rng), 2 * half(rng), 2 * half(rng)};
    const Tensor x = testing::uniform(s, rng);
    const wavelet::FreqSplit split = wavelet::dwt2(x);
    const Tensor back = wavelet::idwt2(split);
    for (std::size_t k = 0; k < x.size(); ++k)
      round_trip = std::max(round_trip, std::abs(back[k] - x[k]));
    double ex = 0.0;
    double es = 0.0;
    for (double v : x.values()) ex += v * v;
    for (double v : split.low.values()) es += v * v;
    for (double v : split.high.values()) es += v * v;
    parseval = std::max(parseval, std::abs(es - ex) / ex);
  }
  o.require(round_trip < 1e-5, "round trip " + fmt("%.2e", round_trip));
  o.require(parseval < 1e-5, "Parseval " + fmt("%.2e", parseval));

  // 2x2 tile (a b; c d) against the 4x4 Haar matrix acting on (a, b, c, d).
  const double h[4][4] = {{0.5, 0.5, 0.5, 0.5},
                          {0.5, -0.5, 0.5, -0.5},
                          {0.5, 0.5, -0.5, -0.5},
                          {0.5, -0.5, -0.5, 0.5}};
  Tensor tile(Shape{1, 1, 2, 2});
  const double px[4] = {1.0, 2.0, 3.0, 4.0};
  for (int k = 0; k < 4; ++k) tile[k] = px[k];
  const wavelet::FreqSplit split = wavelet::dwt2(tile);
  const double got[4] = {split.low[0], split.high[0], split.high[1], split.high[2]};
  bool exact = true;
  for (int r = 0; r < 4; ++r) {
    double want = 0.0;
    for (int k = 0; k < 4; ++k) want += h[r][k] * px[k];
    exact = exact && got[r] == want;
  }
  o.require(exact, "2x2 example exact");
  o.require(run_cases("*test_wavelet.cpp", nullptr, kGradientCases), "wavelet unit cases");
  const double t = seconds_since(start);
  o.require(t < 10.0, fmt("%.1f s", t));
  return o;
}

// ---- gradients

Outcome gradient_suite() {
  Outcome o;
  const auto start = Clock::now();
  o.require(run_cases("*test_ops.cpp,*test_wavelet.cpp,*test_models.cpp,*test_objectives.cpp",
                      kGradientCases),
            "finite-difference cases");
  const double t = seconds_since(start);
  o.require(t < 120.0, fmt("%.1f s", t));
  return o;
}

// ---- loss oracles

Outcome loss_oracles() {
  Outcome o;
  using namespace objectives;
  const Tensor x = Tensor(Shape{2, 1, 4, 4}, 0.3);
  const Mapping half = [](const Var& v) {
    return ops::add_scalar(ops::scale(v, 0.0), 0.5);
  };
  const double lsgan = lsgan_d(half, Var(x), Var(x)).item();
  o.require(lsgan == 0.25, "LSGAN D=0.5 " + fmt("%.17g", lsgan));
  const Mapping offset = [](const Var& v) { return ops::add_scalar(v, 0.1); };
  const Mapping same = [](const Var& v) { return v; };
  const double low = l_low(offset, same, Var(x)).item();
  o.require(std::abs(low - 0.4) < 1e-12, "l_low offset " + fmt("%.17g", low));
  const double s = editor::ssim(Tensor(Shape{1, 1, 16, 16}, 0.0), Tensor(Shape{1, 1, 16, 16}, 1.0));
  o.require(std::abs(s - 9.999e-5) < 1e-7, "SSIM 0 vs 1 " + fmt("%.6e", s));
  o.require(run_cases("*test_objectives.cpp,*test_wavelet.cpp,*test_ops.cpp,*test_models.cpp,"
                      "*test_editor.cpp,*test_datapipe.cpp",
                      nullptr, kGradientCases),
            "numeric examples");
  return o;
}

// ---- identity at init

Outcome identity_at_init() {
  Outcome o;
  const TrainConfig c = desk_profile();
  models::NoiseGenerator g("G", c.model.negan_width, c.model.negan_blocks);
  data::Rng init = data::derive_rng(c.seed, 100, 0);
  init_params(g, init);
  testing::Rng rng(3);
  double worst = 0.0;
  NoGradGuard guard;
  for (int i = 0; i < 10; ++i) {
    const Tensor x = testing::uniform(Shape{1, 1, 16 + 8 * i, 64 - 4 * i}, rng);
    const Tensor y = g.forward(Var(x)).value();
    for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(y[k] - x[k]));
  }
  o.require(worst < 1e-7, "max |G(x) - x| " + fmt("%.2e", worst));
  return o;
}

// ---- noise learner convergence

// Gray texture with a 1/f amplitude spectrum: 120 plane waves with
// frequencies uniform over a disc of radius 32 cycles, scaled into [0.1, 0.9].
Tensor texture(int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(Shape{1, 1, side, side});
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < 120; ++k) {
    const double f = 0.5 + 31.5 * std::sqrt(u(rng));
    const double th = two_pi * u(rng);
    const double ph = two_pi * u(rng);
    const double fy = f * std::sin(th) / side;
    const double fx = f * std::cos(th) / side;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        t.at(0, 0, y, x) += std::sin(two_pi * (fy * y + fx * x) + ph) / f;
  }
  const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
  const double base = *lo;
  const double span = *hi - *lo;
  for (double& v : t.values()) v = 0.1 + 0.8 * (v - base) / span;
  return t;
}

double high_energy(const std::vector<Tensor>& images) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const Tensor& im : images) {
    const Tensor h = wavelet::high_part(im);
    for (double v : h.values()) sum += v * v;
    count += h.size();
  }
  return sum / static_cast<double>(count);
}

Outcome negan_convergence() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(42);
  std::vector<Tensor> clean;
  std::vector<Tensor> noisy;
  for (int i = 0; i < 64; ++i) clean.push_back(texture(64, rng));
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int i = 0; i < 64; ++i) {
    Tensor t = texture(64, rng);
    for (double& v : t.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
    noisy.push_back(t);
  }

  TrainConfig c = desk_profile();
  c.model.negan_width = 8;
  c.model.negan_blocks = 2;
  c.model.disc_width = 8;
  c.batch_size = 2;
  c.stage1_lr = 3e-4;
  c.steps_per_epoch = 100;
  c.stage1_epochs = 20;
  c.seed = 1;
  NeganTrainer t(c, clean, noisy);

  auto translated = [&] {
    NoGradGuard guard;
    std::vector<Tensor> out;
    for (const Tensor& x : clean) out.push_back(t.g().forward(Var(x)).value());
    return out;
  };
  const double e_noisy = high_energy(noisy);
  const double gap0 = std::abs(high_energy(translated()) - e_noisy);
  const std::vector<EpochLog> logs = t.run();
  const double gap = std::abs(high_energy(translated()) - e_noisy);
  const double low = logs.back().mean_terms.at("l_low");

  o.require(t.steps_done() == 2000, std::to_string(t.steps_done()) + " steps");
  o.require(low < 0.05, "final-epoch l_low " + fmt("%.4f", low));
  o.require(gap < 0.5 * gap0, "high-band gap " + fmt("%.3f", gap / gap0) + " of initial");
  const double secs = seconds_since(start);
  o.require(secs < 900.0, fmt("%.0f s", secs));
  return o;
}

// ---- editor overfit

Outcome iegan_overfit() {
  Outcome o;
  const auto start = Clock::now();
  testing::Rng rng(7);
  data::ImageFolder folder;
  for (int i = 0; i < 8; ++i) {
    folder.ids.push_back("im" + std::to_string(i));
    folder.images.push_back(testing::smooth_image(3, 64, 64, rng));
  }
  TrainConfig c = desk_profile();
  const int width = 8;
  c.model.unet_width = width;
  c.model.critic_width = width;
  c.model.percep_width = width;
  c.batch_size = 2;
  c.steps_per_epoch = 50;
  c.stage1_epochs = 10;
  c.stage2_epochs = 28;
  c.stage1_lr = 2e-3;
  c.stage2_lr = 1e-3;
  c.seed = 1;
  IeganTrainer t(c, folder.images, {}, [](const Tensor& x) { return x; });
  const std::vector<EpochLog> logs = t.run();

  const EpochLog& stage1 = logs.at(static_cast<std::size_t>(c.stage1_epochs) - 1);
  o.require(t.stage1_steps() == 500 && stage1.stage == 1, "500 stage-1 steps");
  o.require(stage1.mean_terms.at("l1_c") < 0.02,
            "L_1C " + fmt("%.4f", stage1.mean_terms.at("l1_c")));
  o.require(stage1.mean_terms.at("l1_r") < 0.05,
            "L_1R " + fmt("%.4f", stage1.mean_terms.at("l1_r")));

  const ckpt::Checkpoint ck = t.checkpoint();
  auto cn = std::make_shared<models::InpaintNet>("C", width);
  auto rn = std::make_shared<models::ColorNet>("R", width);
  ckpt::restore_network(ck, *cn);
  ckpt::restore_network(ck, *rn);
  editor::EvalConfig ec;
  ec.size = 64;
  const editor::EvalReport report = editor::evaluate(folder, editor::NetworkInpainter(cn),
                                                     editor::NetworkColorizer(rn), ec);
  o.require(logs.back().stage == 2, "joint stage ran");
  o.require(report.mean_psnr > 30.0, "eval PSNR " + fmt("%.2f dB", report.mean_psnr));
  const double secs = seconds_since(start);
  o.require(secs < 600.0, fmt("%.0f s", secs));
  return o;
}

// ---- ablation plumbing

std::set<std::string> keys(const StepLog& log) {
  std::set<std::string> out;
  for (const auto& [k, v] : log.terms) out.insert(k);
  return out;
}

std::set<std::string> minus(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

std::vector<Tensor> fixture(int channels, int count, std::uint64_t seed) {
  testing::Rng rng(seed);
  std::vector<Tensor> out;
  for (int i = 0; i < count; ++i) out.push_back(testing::smooth_image(channels, 20, 20, rng));
  return out;
}

TrainConfig tiny() {
  TrainConfig c = desk_profile();
  c.model = {4, 1, 4, 4, 4, 4};
  c.crop = 16;
  c.batch_size = 2;
  c.steps_per_epoch = 2;
  c.stage1_epochs = 1;
  c.stage2_epochs = 1;
  c.seed = 5;
  return c;
}

// First-step terms of both learners, plus the stages the editor run visits.
struct Terms {
  StepLog negan;
  StepLog iegan;
  std::set<int> stages;
};

Terms terms_of(const TrainConfig& c) {
  Terms out;
  NeganTrainer n(c, fixture(1, 3, 1), fixture(1, 3, 2));
  out.negan = n.step();
  IeganTrainer e(c, fixture(3, 3, 3), {}, [](const Tensor& t) { return t; });
  out.iegan = e.step();
  IeganTrainer full(c, fixture(3, 3, 3), {}, [](const Tensor& t) { return t; });
  for (const EpochLog& log : full.run()) out.stages.insert(log.stage);
  return out;
}

// Terms present in both logs, apart from the totals, hold equal values.
bool shared_terms_equal(const StepLog& a, const StepLog& b) {
  for (const auto& [k, v] : a.terms)
    if (k != "total" && b.terms.count(k) && b.terms.at(k) != v) return false;
  return true;
}

Outcome ablation_plumbing() {
  Outcome o;
  using Keys = std::set<std::string>;
  const Terms base = terms_of(tiny());
  auto check = [&](const std::string& name, const std::function<void(AblationFlags&)>& flip,
                   const Keys& negan_gone, const Keys& negan_new, const Keys& iegan_gone,
                   const std::set<int>& stages) {
    TrainConfig c = tiny();
    flip(c.ablation);
    const Terms t = terms_of(c);
    const bool ok = minus(keys(base.negan), keys(t.negan)) == negan_gone &&
                    minus(keys(t.negan), keys(base.negan)) == negan_new &&
                    minus(keys(base.iegan), keys(t.iegan)) == iegan_gone &&
                    minus(keys(t.iegan), keys(base.iegan)).empty() && t.stages == stages &&
                    shared_terms_equal(base.iegan, t.iegan) &&
                    (negan_gone.empty() ? shared_terms_equal(base.negan, t.negan) : true);
    o.require(ok, name);
  };
  o.require(base.stages == std::set<int>{1, 2}, "baseline has both stages");
  check("dwt", [](AblationFlags& a) { a.use_dwt_losses = false; },
        {"l_low", "adv_g_high", "adv_f_high"}, {"adv_g_full", "adv_f_full"}, {}, {1, 2});
  check("perceptual", [](AblationFlags& a) { a.use_perceptual = false; }, {}, {}, {"percep_r"},
        {1, 2});
  check("gan", [](AblationFlags& a) { a.use_gan = false; }, {}, {}, {"g_r", "d_r"}, {1, 2});
  check("joint", [](AblationFlags& a) { a.joint_training = false; }, {}, {}, {}, {1});
  o.require(run_cases("*test_cli.cpp", "degrade* edit and eval", nullptr,
                      "evaluation at several scribble counts"),
            "eval --scribbles 10/20/30");
  return o;
}

// ---- determinism

struct RunResult {
  std::map<std::string, double> negan_final;
  std::map<std::string, double> iegan_final;
  std::vector<std::uint8_t> negan_bytes;
  std::vector<std::uint8_t> iegan_bytes;
  std::string negan_file;
  std::string iegan_file;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult desk_run(const fs::path& dir) {
  TrainConfig c = desk_profile();
  c.batch_size = 2;
  c.steps_per_epoch = 2;
  c.stage1_epochs = 1;
  c.stage2_epochs = 1;
  c.seed = 9;
  testing::Rng rng(4);
  std::vector<Tensor> clean, noisy, color;
  for (int i = 0; i < 4; ++i) {
    clean.push_back(testing::smooth_image(1, 64, 64, rng));
    noisy.push_back(testing::smooth_image(1, 64, 64, rng));
    color.push_back(testing::smooth_image(3, 64, 64, rng));
  }
  RunResult r;
  NeganTrainer n(c, clean, noisy);
  r.negan_final = n.run().back().mean_terms;
  const ckpt::Checkpoint nc = n.checkpoint();
  r.negan_bytes = ckpt::serialize(nc);
  ckpt::save_checkpoint(nc, dir / "negan.lped");
  r.negan_file = read_file(dir / "negan.lped");

  IeganTrainer e(c, color, {}, degrader_from(load_noise_generator(nc)));
  r.iegan_final = e.run().back().mean_terms;
  const ckpt::Checkpoint ec = e.checkpoint();
  r.iegan_bytes = ckpt::serialize(ec);
  ckpt::save_checkpoint(ec, dir / "editor.lped");
  r.iegan_file = read_file(dir / "editor.lped");
  return r;
}

bool close_terms(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                 double& worst) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, v] : a) {
    if (!b.count(k)) return false;
    worst = std::max(worst, std::abs(v - b.at(k)));
  }
  return worst <= 1e-6;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "lped_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");
  const RunResult a = desk_run(root / "a");
  const RunResult b = desk_run(root / "b");
  double worst = 0.0;
  const bool losses = close_terms(a.negan_final, b.negan_final, worst) &&
                      close_terms(a.iegan_final, b.iegan_final, worst);
  o.require(losses, "final losses differ by " + fmt("%.1e", worst));
  o.require(a.negan_bytes == b.negan_bytes && a.iegan_bytes == b.iegan_bytes,
            "checkpoints bit-identical");
  o.require(!a.negan_file.empty() && a.negan_file == b.negan_file && a.iegan_file == b.iegan_file,
            "checkpoint files bit-identical");
  fs::remove_all(root);
  return o;
}

// ---- service

Outcome service_contract() {
  Outcome o;
  o.require(run_cases("*test_service.cpp", nullptr), "service cases with identity C");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"wavelet suite", wavelet_suite},
      {"gradient suite", gradient_suite},
      {"loss oracles", loss_oracles},
      {"identity at init", identity_at_init},
      {"noise learner convergence", negan_convergence},
      {"editor overfit", iegan_overfit},
      {"ablation plumbing", ablation_plumbing},
      {"determinism", determinism},
      {"service contract", service_contract},
  };
  // Optional arguments pick criteria by name.
  const std::vector<std::string> only(argv + 1, argv + argc);
  std::vector<std::string> lines;
  bool all = true;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    all = all && out.pass;
    const std::string line =
        std::string(out.pass ? "PASS" : "FAIL") + "  " + c.name + "  (" + out.detail + ")";
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines.push_back(line);
  }
  std::printf("\n");
  for (const std::string& line : lines) std::printf("%s\n", line.c_str());
  return all ? 0 : 1;
}
