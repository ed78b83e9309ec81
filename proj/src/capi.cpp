#include "lped/lped.h"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "lped/checkpoint.hpp"
#include "lped/config.hpp"
#include "lped/editor.hpp"
#include "lped/error.hpp"
#include "lped/image_io.hpp"
#include "lped/service.hpp"
#include "lped/trainer.hpp"

using namespace lped;

struct lped_editor {
  editor::LoadedModels models;
};

struct lped_server {
  std::string checkpoint_c;
  std::string checkpoint_r;
  std::unique_ptr<service::Service> service;
  int port = -1;
};

namespace {

thread_local std::string g_last_error;

lped_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return LPED_ERR_CONFIG;
    case ErrorKind::Data: return LPED_ERR_DATA;
    case ErrorKind::Format: return LPED_ERR_FORMAT;
    case ErrorKind::Version: return LPED_ERR_VERSION;
    case ErrorKind::State: return LPED_ERR_STATE;
    case ErrorKind::Io: return LPED_ERR_IO;
    case ErrorKind::Shape:
    case ErrorKind::Dimension: return LPED_ERR_SHAPE;
    case ErrorKind::Value: return LPED_ERR_VALUE;
  }
  return LPED_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
lped_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return LPED_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return LPED_ERR_CONFIG;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return LPED_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LPED_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorKind::Config, std::string(what) + " is required");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

TrainConfig parse_config(const char* config_json) {
  if (config_json == nullptr || *config_json == '\0') return TrainConfig{};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

void emit(lped_log_fn log, void* user, const nlohmann::json& line) {
  if (log != nullptr) log(line.dump().c_str(), user);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Trains to completion, checkpointing after each epoch.
template <typename Trainer>
void drive(Trainer& trainer, const char* out_path, const char* resume_path,
           lped_log_fn log, void* user) {
  if (resume_path != nullptr) {
    trainer.restore(ckpt::load_checkpoint(resume_path));
    emit(log, user, {{"event", "resume"}, {"step", trainer.steps_done()}});
  }
  emit(log, user, {{"event", "config"}, {"config", to_json(trainer.config())}});
  trainer.run([&](const EpochLog& e) {
    nlohmann::json line = to_json(e);
    line["event"] = "epoch";
    emit(log, user, line);
    ckpt::save_checkpoint(trainer.checkpoint(), out_path);
  });
  ckpt::save_checkpoint(trainer.checkpoint(), out_path);
  emit(log, user, {{"event", "done"}, {"step", trainer.steps_done()}, {"checkpoint", out_path}});
}

}  // namespace

extern "C" {

const char* lped_version(void) { return "1.0.0"; }

const char* lped_last_error(void) { return g_last_error.c_str(); }

const char* lped_status_name(lped_status status) {
  switch (status) {
    case LPED_OK: return "ok";
    case LPED_ERR_INTERNAL: return "internal error";
    case LPED_ERR_CONFIG: return "configuration error";
    case LPED_ERR_DATA: return "data error";
    case LPED_ERR_FORMAT: return "format error";
    case LPED_ERR_VERSION: return "version error";
    case LPED_ERR_STATE: return "state error";
    case LPED_ERR_IO: return "i/o error";
    case LPED_ERR_SHAPE: return "shape error";
    case LPED_ERR_VALUE: return "value error";
  }
  return "unknown status";
}

void lped_free(char* p) { std::free(p); }

lped_status lped_train_negan(const char* clean_dir, const char* noisy_dir,
                             const char* config_json, const char* out_path,
                             const char* resume_path, lped_log_fn log, void* user) {
  return guarded([&] {
    require(clean_dir, "clean directory");
    require(noisy_dir, "noisy directory");
    require(out_path, "output checkpoint path");
    const TrainConfig config = parse_config(config_json);
    auto clean = data::load_folder(clean_dir, 1, config.crop);
    auto noisy = data::load_folder(noisy_dir, 1, config.crop);
    NeganTrainer trainer(config, std::move(clean.images), std::move(noisy.images));
    drive(trainer, out_path, resume_path, log, user);
  });
}

lped_status lped_train_iegan(const char* clean_dir, const char* masks_dir,
                             const char* negan_path, const char* config_json,
                             const char* out_path, const char* resume_path,
                             lped_log_fn log, void* user) {
  return guarded([&] {
    require(clean_dir, "clean directory");
    require(negan_path, "noise-learner checkpoint");
    require(out_path, "output checkpoint path");
    const TrainConfig config = parse_config(config_json);
    const auto g = load_noise_generator(ckpt::load_checkpoint(negan_path));
    auto clean = data::load_folder(clean_dir, 3, config.crop);
    std::vector<data::MaskMap> templates;
    if (masks_dir != nullptr) templates = data::load_mask_templates(masks_dir, config.crop);
    IeganTrainer trainer(config, std::move(clean.images), std::move(templates),
                         degrader_from(g));
    drive(trainer, out_path, resume_path, log, user);
  });
}

lped_status lped_degrade(const char* in_dir, const char* negan_path, const char* out_dir,
                         size_t* written) {
  return guarded([&] {
    require(in_dir, "input directory");
    require(negan_path, "noise-learner checkpoint");
    require(out_dir, "output directory");
    const ckpt::Checkpoint checkpoint = ckpt::load_checkpoint(negan_path);
    const auto g = load_noise_generator(checkpoint);
    const auto files = io::list_images(in_dir);
    if (files.empty()) fail(ErrorKind::Config, std::string("no images in ") + in_dir);
    std::filesystem::create_directories(out_dir);
    nlohmann::json manifest{{"negan_checkpoint", negan_path},
                            {"config", checkpoint.meta.at("config")},
                            {"architecture_hash", checkpoint.meta.value("architecture_hash", "")},
                            {"outputs", nlohmann::json::array()}};
    std::size_t count = 0;
    for (const auto& file : files) {
      const Tensor noisy = degrade_image(*g, io::load_image(file, 1));
      const auto target =
          std::filesystem::path(out_dir) / file.filename().replace_extension(".png");
      io::save_png(noisy, target);
      manifest["outputs"].push_back(target.filename().string());
      ++count;
    }
    std::ofstream(std::filesystem::path(out_dir) / "degrade.json") << manifest.dump(2) << "\n";
    if (written != nullptr) *written = count;
  });
}

lped_status lped_editor_open(const char* checkpoint_c, const char* checkpoint_r,
                             lped_editor** out) {
  return guarded([&] {
    require(checkpoint_c, "C checkpoint");
    require(checkpoint_r, "R checkpoint");
    require(out, "output handle");
    *out = nullptr;
    auto ed = std::make_unique<lped_editor>();
    ed->models = editor::load_models(checkpoint_c, checkpoint_r);
    *out = ed.release();
  });
}

void lped_editor_close(lped_editor* editor) { delete editor; }

lped_status lped_editor_info(const lped_editor* editor, char** info_json) {
  return guarded([&] {
    if (editor == nullptr) fail(ErrorKind::State, "editor is not open");
    require(info_json, "output string");
    *info_json = dup_string(editor->models.meta.dump());
  });
}

lped_status lped_editor_edit_files(const lped_editor* editor, const char* image_path,
                                   const char* mask_path, const char* scribbles_path,
                                   const char* out_path) {
  return guarded([&] {
    if (editor == nullptr) fail(ErrorKind::State, "editor is not open");
    require(image_path, "image path");
    require(out_path, "output path");
    const Tensor image = io::load_image(image_path, 0);
    const int h = image.shape().h, w = image.shape().w;
    editor::EditRequest req;
    req.gray = image.shape().c == 3 ? data::to_grayscale(image) : image;
    if (mask_path != nullptr) {
      req.mask = data::binarize(io::load_image(mask_path, 1));
      if (req.mask.values.shape().h != h || req.mask.values.shape().w != w) {
        fail(ErrorKind::Data, "mask size differs from the image size");
      }
    } else {
      req.mask = data::full_mask(h, w);
    }
    std::vector<service::Stroke> strokes;
    if (scribbles_path != nullptr) {
      strokes = service::parse_strokes(read_text(scribbles_path));
      if (auto bad = service::first_invalid_stroke(strokes, h, w)) {
        fail(ErrorKind::Data, "stroke " + std::to_string(*bad) +
                                  " is outside the image or out of range");
      }
    }
    req.scribbles = service::rasterize_strokes(strokes, h, w);
    const Tensor out = editor::edit(req, editor->models.c.get(), editor->models.r.get());
    io::save_png(out, out_path);
    const nlohmann::json sidecar{{"image", image_path},
                                 {"mask", mask_path ? mask_path : ""},
                                 {"scribbles", scribbles_path ? scribbles_path : ""},
                                 {"strokes", strokes.size()},
                                 {"models", editor->models.meta}};
    std::ofstream(std::string(out_path) + ".json") << sidecar.dump(2) << "\n";
  });
}

lped_status lped_editor_evaluate(const lped_editor* editor, const char* dataset_dir,
                                 const char* eval_json, char** report_json,
                                 char** table) {
  return guarded([&] {
    if (editor == nullptr) fail(ErrorKind::State, "editor is not open");
    require(dataset_dir, "dataset directory");
    editor::EvalConfig config;
    if (eval_json != nullptr && *eval_json != '\0') {
      const auto j = nlohmann::json::parse(eval_json);
      for (const auto& [key, value] : j.items()) {
        if (key == "size") config.size = value.get<int>();
        else if (key == "sigma") config.sigma = value.get<double>();
        else if (key == "scribbles") config.scribbles = value.get<int>();
        else if (key == "stroke_size") config.stroke_size = value.get<int>();
        else if (key == "seed") config.seed = value.get<std::uint64_t>();
        else if (key == "masks") config.masks_dir = value.get<std::string>();
        else fail(ErrorKind::Config, "unknown evaluation key '" + key + "'");
      }
    }
    const editor::EvalReport report =
        editor::evaluate(dataset_dir, *editor->models.c, *editor->models.r, config);
    nlohmann::json j = report.to_json();
    j["models"] = editor->models.meta;
    if (report_json != nullptr) *report_json = dup_string(j.dump(2));
    if (table != nullptr) *table = dup_string(report.table());
  });
}

lped_status lped_server_create(const char* checkpoint_c, const char* checkpoint_r,
                               const char* host, int port, int max_side, int workers,
                               lped_server** out) {
  return guarded([&] {
    require(checkpoint_c, "C checkpoint");
    require(checkpoint_r, "R checkpoint");
    require(out, "output handle");
    *out = nullptr;
    service::ServiceConfig config;
    if (host != nullptr) config.host = host;
    config.port = port;
    config.max_side = max_side;
    config.workers = workers;
    auto server = std::make_unique<lped_server>();
    server->checkpoint_c = checkpoint_c;
    server->checkpoint_r = checkpoint_r;
    server->service = std::make_unique<service::Service>(config);
    server->port = server->service->bind();
    if (server->port < 0) {
      fail(ErrorKind::Io, "cannot bind " + config.host + ":" + std::to_string(port));
    }
    *out = server.release();
  });
}

int lped_server_port(const lped_server* server) { return server ? server->port : -1; }

lped_status lped_server_run(lped_server* server) {
  return guarded([&] {
    if (server == nullptr) fail(ErrorKind::State, "server is not created");
    std::string load_error;
    lped_status load_status = LPED_OK;
    std::thread loader([&] {
      load_status = guarded([&] {
        server->service->load(
            editor::load_models(server->checkpoint_c, server->checkpoint_r));
      });
      if (load_status != LPED_OK) {
        load_error = g_last_error;
        server->service->stop();
      }
    });
    server->service->listen();
    loader.join();
    if (load_status != LPED_OK) {
      throw Error(load_status == LPED_ERR_CONFIG ? ErrorKind::Config : ErrorKind::Data,
                  "loading models: " + load_error);
    }
  });
}

void lped_server_stop(lped_server* server) {
  if (server != nullptr) server->service->stop();
}

void lped_server_destroy(lped_server* server) { delete server; }

}  // extern "C"
