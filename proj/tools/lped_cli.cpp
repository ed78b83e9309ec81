// Command-line front end. Everything goes through the C interface.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lped/lped.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int exit_code(lped_status s) {
  switch (s) {
    case LPED_OK: return kExitOk;
    case LPED_ERR_CONFIG: return kExitConfig;
    case LPED_ERR_DATA:
    case LPED_ERR_IO:
    case LPED_ERR_FORMAT:
    case LPED_ERR_VERSION:
    case LPED_ERR_SHAPE: return kExitData;
    default: return kExitFailure;
  }
}

int report(lped_status s) {
  if (s != LPED_OK) {
    std::cerr << "lped: " << lped_status_name(s) << ": " << lped_last_error() << "\n";
  }
  return exit_code(s);
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training options that may also come from the config file. Flags win.
struct TrainFlags {
  std::string config_file;
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
  std::optional<int> batch_size, crop, stage1_epochs, stage2_epochs, steps_per_epoch;
  std::optional<double> stage1_lr, stage2_lr;
  std::string resume;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--profile", profile, "base profile: desk or full");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--batch-size", batch_size);
    cmd->add_option("--crop", crop, "training crop side (multiple of 16)");
    cmd->add_option("--stage1-epochs", stage1_epochs);
    cmd->add_option("--stage2-epochs", stage2_epochs);
    cmd->add_option("--steps-per-epoch", steps_per_epoch, "0 derives it from the dataset");
    cmd->add_option("--stage1-lr", stage1_lr);
    cmd->add_option("--stage2-lr", stage2_lr);
    cmd->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);
  }

  std::string resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(config_file + ": " + e.what());
      }
      if (!j.is_object()) throw ConfigError(config_file + ": config must be a JSON object");
    }
    if (profile) j["profile"] = *profile;
    if (seed) j["seed"] = *seed;
    if (batch_size) j["batch_size"] = *batch_size;
    if (crop) j["crop"] = *crop;
    if (stage1_epochs) j["stage1_epochs"] = *stage1_epochs;
    if (stage2_epochs) j["stage2_epochs"] = *stage2_epochs;
    if (steps_per_epoch) j["steps_per_epoch"] = *steps_per_epoch;
    if (stage1_lr) j["stage1_lr"] = *stage1_lr;
    if (stage2_lr) j["stage2_lr"] = *stage2_lr;
    return j.dump();
  }
};

void print_line(const char* line, void*) {
  std::cout << line << std::endl;
}

const char* opt_path(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Legacy photo editor: noise learning, editing, evaluation and serving"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lped_version()));

  // train-negan
  auto* tn = app.add_subcommand("train-negan", "train the clean-to-noisy translator");
  std::string tn_clean, tn_noisy, tn_out;
  TrainFlags tn_flags;
  tn->add_option("--clean", tn_clean, "folder of clean images")->required();
  tn->add_option("--noisy", tn_noisy, "folder of noisy images")->required();
  tn->add_option("--out", tn_out, "output checkpoint")->required();
  tn_flags.add_to(tn);

  // train-iegan
  auto* ti = app.add_subcommand("train-iegan", "train the inpainting and colour networks");
  std::string ti_clean, ti_masks, ti_negan, ti_out;
  TrainFlags ti_flags;
  ti->add_option("--clean", ti_clean, "folder of clean colour images")->required();
  ti->add_option("--masks", ti_masks, "folder of crack mask templates");
  ti->add_option("--negan", ti_negan, "noise-learner checkpoint")->required();
  ti->add_option("--out", ti_out, "output checkpoint")->required();
  ti_flags.add_to(ti);

  // degrade
  auto* dg = app.add_subcommand("degrade", "apply a trained noise generator to a folder");
  std::string dg_in, dg_negan, dg_out;
  dg->add_option("--in", dg_in, "input folder")->required();
  dg->add_option("--negan", dg_negan, "noise-learner checkpoint")->required();
  dg->add_option("--out", dg_out, "output folder")->required();

  // edit
  auto* ed = app.add_subcommand("edit", "restore and colourise one photo");
  std::string ed_image, ed_mask, ed_scribbles, ed_c, ed_r, ed_out;
  ed->add_option("--image", ed_image, "input photo")->required();
  ed->add_option("--mask", ed_mask, "binary mask PNG (0 = damaged)");
  ed->add_option("--scribbles", ed_scribbles, "JSON list of strokes");
  ed->add_option("--checkpoint-c", ed_c, "inpainting checkpoint")->required();
  ed->add_option("--checkpoint-r", ed_r, "colour checkpoint")->required();
  ed->add_option("--out", ed_out, "output PNG")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "score the editor on a folder of colour photos");
  std::string ev_dataset, ev_c, ev_r, ev_report, ev_masks;
  int ev_scribbles = 30, ev_size = 256;
  double ev_sigma = 0.05;
  std::uint64_t ev_seed = 0;
  ev->add_option("--dataset", ev_dataset, "folder of colour images")->required();
  ev->add_option("--checkpoint-c", ev_c, "inpainting checkpoint")->required();
  ev->add_option("--checkpoint-r", ev_r, "colour checkpoint")->required();
  ev->add_option("--report", ev_report, "JSON report path")->required();
  ev->add_option("--scribbles", ev_scribbles, "colour scribbles per image")
      ->capture_default_str();
  ev->add_option("--sigma", ev_sigma, "Gaussian noise std")->capture_default_str();
  ev->add_option("--size", ev_size, "evaluation side")->capture_default_str();
  ev->add_option("--seed", ev_seed, "random seed")->capture_default_str();
  ev->add_option("--masks", ev_masks, "mask template folder (default: pseudo masks)");

  // serve
  auto* sv = app.add_subcommand("serve", "run the HTTP editing service");
  std::string sv_c, sv_r, sv_host = "127.0.0.1";
  int sv_port = 8787, sv_max_side = 2048, sv_workers = 4;
  sv->add_option("--checkpoint-c", sv_c, "inpainting checkpoint")->required();
  sv->add_option("--checkpoint-r", sv_r, "colour checkpoint")->required();
  sv->add_option("--host", sv_host)->capture_default_str();
  sv->add_option("--port", sv_port)->capture_default_str();
  sv->add_option("--max-side", sv_max_side, "largest accepted image side")
      ->capture_default_str();
  sv->add_option("--workers", sv_workers, "concurrent edits")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "lped: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*tn) {
      return report(lped_train_negan(tn_clean.c_str(), tn_noisy.c_str(),
                                     tn_flags.resolve().c_str(), tn_out.c_str(),
                                     opt_path(tn_flags.resume), print_line, nullptr));
    }
    if (*ti) {
      return report(lped_train_iegan(ti_clean.c_str(), opt_path(ti_masks), ti_negan.c_str(),
                                     ti_flags.resolve().c_str(), ti_out.c_str(),
                                     opt_path(ti_flags.resume), print_line, nullptr));
    }
  } catch (const ConfigError& e) {
    std::cerr << "lped: configuration error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (*dg) {
    size_t written = 0;
    const lped_status s = lped_degrade(dg_in.c_str(), dg_negan.c_str(), dg_out.c_str(), &written);
    if (s == LPED_OK) std::cout << "wrote " << written << " images to " << dg_out << "\n";
    return report(s);
  }

  if (*ed) {
    lped_editor* editor = nullptr;
    lped_status s = lped_editor_open(ed_c.c_str(), ed_r.c_str(), &editor);
    if (s == LPED_OK) {
      s = lped_editor_edit_files(editor, ed_image.c_str(), opt_path(ed_mask),
                                 opt_path(ed_scribbles), ed_out.c_str());
    }
    lped_editor_close(editor);
    return report(s);
  }

  if (*ev) {
    nlohmann::json cfg{{"size", ev_size},
                       {"sigma", ev_sigma},
                       {"scribbles", ev_scribbles},
                       {"seed", ev_seed}};
    if (!ev_masks.empty()) cfg["masks"] = ev_masks;
    lped_editor* editor = nullptr;
    lped_status s = lped_editor_open(ev_c.c_str(), ev_r.c_str(), &editor);
    char* report_json = nullptr;
    char* table = nullptr;
    if (s == LPED_OK) {
      s = lped_editor_evaluate(editor, ev_dataset.c_str(), cfg.dump().c_str(), &report_json,
                               &table);
    }
    int code = report(s);
    if (s == LPED_OK) {
      std::ofstream out(ev_report);
      out << report_json << "\n";
      if (out) {
        std::cout << table;
      } else {
        std::cerr << "lped: cannot write " << ev_report << "\n";
        code = kExitData;
      }
    }
    lped_free(report_json);
    lped_free(table);
    lped_editor_close(editor);
    return code;
  }

  if (*sv) {
    lped_server* server = nullptr;
    lped_status s = lped_server_create(sv_c.c_str(), sv_r.c_str(), sv_host.c_str(), sv_port,
                                       sv_max_side, sv_workers, &server);
    if (s != LPED_OK) return report(s);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([server] {
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      lped_server_stop(server);
    });
    std::cout << "listening on http://" << sv_host << ":" << lped_server_port(server)
              << std::endl;
    s = lped_server_run(server);
    g_stop = true;
    watcher.join();
    lped_server_destroy(server);
    return report(s);
  }
  return kExitFailure;
}
