#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lped/image_io.hpp"
#include "lped/lped.h"
#include "support/testing.hpp"

#ifndef LPED_CLI_PATH
#error "LPED_CLI_PATH must name the lped executable"
#endif

using namespace lped;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fixture folders and small checkpoints shared by every case.
struct Workspace {
  fs::path root = fs::temp_directory_path() / "lped_test_cli";

  Workspace() {
    fs::remove_all(root);
    testing::Rng rng(1);
    for (const char* d : {"clean", "noisy", "color", "masks"}) fs::create_directories(root / d);
    for (int i = 0; i < 3; ++i) {
      const std::string name = "im" + std::to_string(i) + ".png";
      io::save_png(testing::smooth_image(1, 24, 24, rng), root / "clean" / name);
      Tensor n = testing::smooth_image(1, 24, 24, rng);
      for (double& v : n.values()) v += 0.1 * std::normal_distribution<>()(rng);
      io::save_png(n, root / "noisy" / name);
      io::save_png(testing::smooth_image(3, 40, 36, rng), root / "color" / name);
    }
    Tensor mask(Shape{1, 1, 32, 32}, 1.0);
    for (int x = 0; x < 32; ++x) mask.at(0, 0, 16, x) = 0.0;
    io::save_png(mask, root / "masks" / "crack.png");
    std::ofstream(root / "tiny.json") << json{
        {"profile", "desk"},
        {"crop", 16},
        {"batch_size", 2},
        {"steps_per_epoch", 1},
        {"stage1_epochs", 1},
        {"stage2_epochs", 1},
        {"model", {{"negan_width", 4}, {"negan_blocks", 1}, {"disc_width", 4},
                   {"unet_width", 4}, {"critic_width", 4}, {"percep_width", 4}}}};
  }
  ~Workspace() { fs::remove_all(root); }

  Run cli(const std::string& args) const {
    const fs::path log = root / "cli.log";
    const std::string cmd = std::string(LPED_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return Run{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  }
  std::string p(const std::string& rel) const { return (root / rel).string(); }
};

const Workspace& ws() {
  static const Workspace w;
  return w;
}

// Trains both checkpoints once.
void ensure_checkpoints() {
  static bool done = false;
  if (done) return;
  const Workspace& w = ws();
  REQUIRE(w.cli("train-negan --clean " + w.p("clean") + " --noisy " + w.p("noisy") +
                " --config " + w.p("tiny.json") + " --out " + w.p("negan.lped"))
              .code == 0);
  REQUIRE(w.cli("train-iegan --clean " + w.p("color") + " --masks " + w.p("masks") +
                " --negan " + w.p("negan.lped") + " --config " + w.p("tiny.json") + " --out " +
                w.p("editor.lped"))
              .code == 0);
  done = true;
}

}  // namespace

TEST_CASE("argument errors exit with status 2") {
  CHECK(ws().cli("").code == 2);
  CHECK(ws().cli("edit --bogus 1").code == 2);
  const Run r = ws().cli("train-negan --clean x");
  CHECK(r.code == 2);
  CHECK(r.out.find("--noisy") != std::string::npos);
  CHECK(ws().cli("--help").code == 0);
}

TEST_CASE("training commands") {
  const Workspace& w = ws();
  const Run r = w.cli("train-negan --clean " + w.p("clean") + " --noisy " + w.p("noisy") +
                      " --config " + w.p("tiny.json") + " --seed 3 --out " + w.p("n2.lped"));
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<json> events;
  while (std::getline(lines, line)) events.push_back(json::parse(line));
  REQUIRE(events.size() >= 2);
  CHECK(events.front()["config"]["seed"] == 3);
  CHECK(events.back()["event"] == "done");
  CHECK(fs::exists(w.p("n2.lped")));

  SUBCASE("resume continues past the saved step") {
    const Run again = w.cli("train-negan --clean " + w.p("clean") + " --noisy " + w.p("noisy") +
                            " --config " + w.p("tiny.json") + " --seed 3 --stage1-epochs 2" +
                            " --resume " + w.p("n2.lped") + " --out " + w.p("n3.lped"));
    CHECK(again.code == 0);
    CHECK(again.out.find("\"epoch\":2") != std::string::npos);
    CHECK(again.out.find("\"epoch\":1,") == std::string::npos);
  }
  SUBCASE("config problems") {
    std::ofstream(w.p("bad.json")) << R"({"no_such_key": 1})";
    CHECK(w.cli("train-negan --clean " + w.p("clean") + " --noisy " + w.p("noisy") +
                " --config " + w.p("bad.json") + " --out " + w.p("x.lped"))
              .code == 2);
    CHECK(w.cli("train-negan --clean " + w.p("clean") + " --noisy " + w.p("noisy") +
                " --config " + w.p("tiny.json") + " --batch-size 0 --out " + w.p("x.lped"))
              .code == 2);
  }
  SUBCASE("missing data") {
    CHECK(w.cli("train-negan --clean " + w.p("nowhere") + " --noisy " + w.p("noisy") +
                " --config " + w.p("tiny.json") + " --out " + w.p("x.lped"))
              .code == 3);
  }
}

TEST_CASE("degrade, edit and eval") {
  ensure_checkpoints();
  const Workspace& w = ws();

  const Run d = w.cli("degrade --in " + w.p("clean") + " --negan " + w.p("negan.lped") +
                      " --out " + w.p("degraded"));
  CHECK(d.code == 0);
  CHECK(fs::exists(w.p("degraded/im0.png")));
  CHECK(json::parse(slurp(w.p("degraded/degrade.json"))).contains("config"));

  SUBCASE("automatic edit") {
    const Run e = w.cli("edit --image " + w.p("color/im0.png") + " --checkpoint-c " +
                        w.p("editor.lped") + " --checkpoint-r " + w.p("editor.lped") +
                        " --out " + w.p("out.png"));
    REQUIRE(e.code == 0);
    const Tensor out = io::load_image(w.p("out.png"), 0);
    CHECK(out.shape() == Shape{1, 3, 40, 36});
    CHECK(fs::exists(w.p("out.png.json")));
  }
  SUBCASE("guided edit and bad inputs") {
    std::ofstream(w.p("strokes.json")) << R"([{"x": 3, "y": 4, "radius": 2, "rgb": [200, 10, 10]}])";
    io::save_png(Tensor(Shape{1, 1, 40, 36}, 1.0), w.p("mask.png"));
    const std::string base = "edit --image " + w.p("color/im1.png") + " --checkpoint-c " +
                             w.p("editor.lped") + " --checkpoint-r " + w.p("editor.lped");
    CHECK(w.cli(base + " --mask " + w.p("mask.png") + " --scribbles " + w.p("strokes.json") +
                " --out " + w.p("guided.png"))
              .code == 0);
    CHECK(w.cli(base + " --mask " + w.p("masks/crack.png") + " --out " + w.p("x.png")).code == 3);
    CHECK(w.cli("edit --image " + w.p("color/im1.png") + " --checkpoint-c " +
                w.p("negan.lped") + " --checkpoint-r " + w.p("editor.lped") + " --out " +
                w.p("x.png"))
              .code == 3);
  }
  SUBCASE("evaluation at several scribble counts") {
    for (int n : {10, 20, 30}) {
      const std::string report = w.p("report" + std::to_string(n) + ".json");
      const Run e = w.cli("eval --dataset " + w.p("color") + " --checkpoint-c " +
                          w.p("editor.lped") + " --checkpoint-r " + w.p("editor.lped") +
                          " --size 32 --scribbles " + std::to_string(n) + " --report " + report);
      REQUIRE(e.code == 0);
      CHECK(e.out.find("PSNR") != std::string::npos);
      const json j = json::parse(slurp(report));
      CHECK(j["config"]["scribbles"] == n);
      CHECK(j["per_image"].size() == 3);
      CHECK(j["mean_psnr"].is_number());
    }
  }
}

TEST_CASE("c interface") {
  ensure_checkpoints();
  const Workspace& w = ws();
  CHECK(std::string(lped_version()).size() > 0);
  CHECK(std::string(lped_status_name(LPED_ERR_VERSION)) != std::string(lped_status_name(LPED_OK)));

  lped_editor* editor = nullptr;
  CHECK(lped_editor_open(w.p("missing.lped").c_str(), w.p("editor.lped").c_str(), &editor) ==
        LPED_ERR_IO);
  CHECK(std::string(lped_last_error()).size() > 0);
  REQUIRE(lped_editor_open(w.p("editor.lped").c_str(), w.p("editor.lped").c_str(), &editor) ==
          LPED_OK);
  char* info = nullptr;
  REQUIRE(lped_editor_info(editor, &info) == LPED_OK);
  const json meta = json::parse(info);
  lped_free(info);
  CHECK(meta["C"]["architecture_hash"].is_string());
  char* report = nullptr;
  char* table = nullptr;
  CHECK(lped_editor_evaluate(editor, w.p("color").c_str(), R"({"size": 32, "oops": 1})", &report,
                             &table) == LPED_ERR_CONFIG);
  lped_editor_close(editor);

  lped_server* server = nullptr;
  REQUIRE(lped_server_create(w.p("editor.lped").c_str(), w.p("editor.lped").c_str(), "127.0.0.1",
                             0, 256, 1, &server) == LPED_OK);
  const int port = lped_server_port(server);
  REQUIRE(port > 0);
  lped_status run_status = LPED_ERR_INTERNAL;
  std::thread t([&] { run_status = lped_server_run(server); });
  httplib::Client client("127.0.0.1", port);
  int status = 0;
  for (int i = 0; i < 200 && status != 200; ++i) {
    if (auto res = client.Get("/v1/health")) status = res->status;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  CHECK(status == 200);
  auto models = client.Get("/v1/models");
  REQUIRE(models);
  CHECK(json::parse(models->body)["architecture_hash"] == meta["C"]["architecture_hash"]);
  lped_server_stop(server);
  t.join();
  CHECK(run_status == LPED_OK);
  lped_server_destroy(server);
}
