#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lped/datapipe.hpp"
#include "lped/editor.hpp"

namespace lped::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8787;
  int max_side = 2048;
  int workers = 4;  // concurrent requests in flight
};

// Wire form of one colour hint: a filled disc of `radius` pixels.
struct Stroke {
  int x = 0;
  int y = 0;
  int radius = 1;
  std::array<int, 3> rgb{};
};

// Parses a JSON list of {x, y, radius, rgb: [r, g, b]}. Throws Data on
// malformed JSON or missing/mistyped fields.
std::vector<Stroke> parse_strokes(const std::string& text);

// Index of the first stroke whose centre lies outside a height x width image
// or whose radius / colour is out of range.
std::optional<std::size_t> first_invalid_stroke(const std::vector<Stroke>& strokes,
                                                 int height, int width);

// Pixels with dx^2 + dy^2 <= radius^2 take the stroke colour (value / 255);
// later strokes overwrite earlier ones. Discs are clipped at the border.
data::ScribbleMap rasterize_strokes(const std::vector<Stroke>& strokes, int height,
                                    int width);

struct EditInputs {
  std::string image;
  std::optional<std::string> mask;
  std::optional<std::string> scribbles;
};

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  double edit_ms = 0.0;
};

// HTTP front end over a frozen editor. Routes:
//   POST /v1/edit     multipart image [mask] [scribbles] -> PNG
//   GET  /v1/health   {status, checkpoint_ids}
//   GET  /v1/models   {architecture_hash, networks, config}
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Models are immutable once installed.
  void load(editor::LoadedModels models);
  bool loaded() const;

  Reply edit(const EditInputs& inputs) const;
  Reply health() const;
  Reply models() const;

  // Binds host:port (port 0 picks a free one) and returns the bound port,
  // or -1 when binding fails.
  int bind();
  // Serves until stop(); call after bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lped::service
