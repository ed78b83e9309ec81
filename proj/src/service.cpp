#include "lped/service.hpp"

#include <chrono>
#include <cstring>
#include <mutex>
#include <semaphore>
#include <span>

#include <httplib.h>

#include "lped/error.hpp"
#include "lped/image_io.hpp"

namespace lped::service {
namespace {

using nlohmann::json;

Reply json_reply(int status, const json& body) {
  return Reply{status, "application/json", body.dump(), 0.0};
}

Reply error_reply(int status, const std::string& message) {
  return json_reply(status, {{"error", message}});
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Width/height from a PNG header, without decoding pixels.
std::optional<std::pair<int, int>> png_size(const std::string& bytes) {
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kSig, 8) != 0) return std::nullopt;
  auto be32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
  };
  const std::uint32_t w = be32(16), h = be32(20);
  if (w > 1u << 30 || h > 1u << 30) return std::pair<int, int>{1 << 30, 1 << 30};
  return std::pair<int, int>{static_cast<int>(w), static_cast<int>(h)};
}

std::string oversize_message(int w, int h, int max_side) {
  return "image " + std::to_string(w) + "x" + std::to_string(h) +
         " exceeds the maximum side of " + std::to_string(max_side);
}

int int_field(const json& s, const char* key, std::size_t index) {
  if (!s.contains(key) || !s.at(key).is_number_integer()) {
    fail(ErrorKind::Data, "stroke " + std::to_string(index) + ": field '" + key +
                              "' must be an integer");
  }
  return s.at(key).get<int>();
}

}  // namespace

std::vector<Stroke> parse_strokes(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Data, std::string("scribbles are not valid JSON: ") + e.what());
  }
  if (!j.is_array()) fail(ErrorKind::Data, "scribbles must be a JSON list");
  std::vector<Stroke> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& s = j[i];
    if (!s.is_object()) fail(ErrorKind::Data, "stroke " + std::to_string(i) + " is not an object");
    Stroke st;
    st.x = int_field(s, "x", i);
    st.y = int_field(s, "y", i);
    st.radius = int_field(s, "radius", i);
    if (!s.contains("rgb") || !s.at("rgb").is_array() || s.at("rgb").size() != 3) {
      fail(ErrorKind::Data, "stroke " + std::to_string(i) + ": rgb must list 3 values");
    }
    for (int c = 0; c < 3; ++c) {
      const json& v = s.at("rgb")[c];
      if (!v.is_number_integer()) {
        fail(ErrorKind::Data, "stroke " + std::to_string(i) + ": rgb values must be integers");
      }
      st.rgb[c] = v.get<int>();
    }
    out.push_back(st);
  }
  return out;
}

std::optional<std::size_t> first_invalid_stroke(const std::vector<Stroke>& strokes,
                                                 int height, int width) {
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    const Stroke& s = strokes[i];
    const bool inside = s.x >= 0 && s.y >= 0 && s.x < width && s.y < height;
    bool colour_ok = true;
    for (int v : s.rgb) colour_ok = colour_ok && v >= 0 && v <= 255;
    if (!inside || s.radius < 1 || !colour_ok) return i;
  }
  return std::nullopt;
}

data::ScribbleMap rasterize_strokes(const std::vector<Stroke>& strokes, int height,
                                    int width) {
  data::ScribbleMap out = data::empty_scribbles(height, width);
  for (const Stroke& s : strokes) {
    const long r2 = static_cast<long>(s.radius) * s.radius;
    for (int y = std::max(0, s.y - s.radius); y <= std::min(height - 1, s.y + s.radius); ++y) {
      for (int x = std::max(0, s.x - s.radius); x <= std::min(width - 1, s.x + s.radius); ++x) {
        const long dx = x - s.x, dy = y - s.y;
        if (dx * dx + dy * dy > r2) continue;
        for (int c = 0; c < 3; ++c) out.hint.at(0, c, y, x) = s.rgb[c] / 255.0;
        out.indicator.at(0, 0, y, x) = 1.0;
      }
    }
  }
  return out;
}

struct Service::Impl {
  explicit Impl(ServiceConfig c) : config(std::move(c)), slots(config.workers) {}

  std::shared_ptr<const editor::LoadedModels> snapshot() const {
    std::lock_guard lock(mutex);
    return models;
  }

  ServiceConfig config;
  mutable std::mutex mutex;
  std::shared_ptr<const editor::LoadedModels> models;
  mutable std::counting_semaphore<> slots;
  httplib::Server server;
};

Service::Service(ServiceConfig config) {
  if (config.workers < 1) fail(ErrorKind::Config, "workers must be >= 1");
  if (config.max_side < 16) fail(ErrorKind::Config, "max_side must be >= 16");
  if (config.port < 0 || config.port > 65535) fail(ErrorKind::Config, "port out of range");
  impl_ = std::make_unique<Impl>(std::move(config));

  auto& srv = impl_->server;
  // Connections are cheap; the semaphore caps concurrent inferences.
  const int pool = impl_->config.workers + 4;
  srv.new_task_queue = [pool] { return new httplib::ThreadPool(pool); };
  srv.set_payload_max_length(256u << 20);
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  srv.Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, health());
  });
  srv.Get("/v1/models", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, models());
  });
  srv.Options("/v1/edit", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Expose-Headers", "X-Edit-Ms");
    res.status = 204;
  });
  srv.Post("/v1/edit", [this, send](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("image")) {
      send(res, error_reply(400, "expected multipart form data with an 'image' part"));
      return;
    }
    EditInputs in;
    in.image = req.get_file_value("image").content;
    if (req.has_file("mask")) in.mask = req.get_file_value("mask").content;
    if (req.has_file("scribbles")) in.scribbles = req.get_file_value("scribbles").content;
    const Reply r = edit(in);
    send(res, r);
    res.set_header("Access-Control-Expose-Headers", "X-Edit-Ms");
    if (r.status == 200) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.edit_ms);
      res.set_header("X-Edit-Ms", buf);
    }
  });
}

Service::~Service() { stop(); }

void Service::load(editor::LoadedModels models) {
  if (!models.c || !models.r) fail(ErrorKind::State, "both C and R are required");
  auto ptr = std::make_shared<const editor::LoadedModels>(std::move(models));
  std::lock_guard lock(impl_->mutex);
  impl_->models = std::move(ptr);
}

bool Service::loaded() const { return impl_->snapshot() != nullptr; }

Reply Service::health() const {
  const auto m = impl_->snapshot();
  if (!m) return json_reply(503, {{"status", "loading"}, {"checkpoint_ids", json::array()}});
  return json_reply(200, {{"status", "ok"}, {"checkpoint_ids", m->checkpoint_ids}});
}

Reply Service::models() const {
  const auto m = impl_->snapshot();
  if (!m) return error_reply(503, "models not loaded");
  json body{{"networks", m->meta}};
  if (m->meta.contains("C")) {
    body["architecture_hash"] = m->meta["C"].value("architecture_hash", "");
    body["config"] = m->meta["C"].value("config", json::object());
  }
  return json_reply(200, body);
}

Reply Service::edit(const EditInputs& inputs) const {
  const auto m = impl_->snapshot();
  if (!m) return error_reply(503, "models not loaded");
  const int max_side = impl_->config.max_side;
  if (auto size = png_size(inputs.image);
      size && std::max(size->first, size->second) > max_side) {
    return error_reply(413, oversize_message(size->first, size->second, max_side));
  }
  Tensor image;
  try {
    image = io::decode_image(as_bytes(inputs.image), 0);
  } catch (const Error& e) {
    return error_reply(400, std::string("image: ") + e.what());
  }
  const int h = image.shape().h, w = image.shape().w;
  if (std::max(h, w) > max_side) return error_reply(413, oversize_message(w, h, max_side));

  editor::EditRequest req;
  req.gray = image.shape().c == 3 ? data::to_grayscale(image) : image;
  if (inputs.mask) {
    try {
      req.mask = data::binarize(io::decode_image(as_bytes(*inputs.mask), 1));
    } catch (const Error& e) {
      return error_reply(400, std::string("mask: ") + e.what());
    }
    if (req.mask.values.shape().h != h || req.mask.values.shape().w != w) {
      return error_reply(400, "mask size differs from the image size");
    }
  } else {
    req.mask = data::full_mask(h, w);
  }
  std::vector<Stroke> strokes;
  if (inputs.scribbles) {
    try {
      strokes = parse_strokes(*inputs.scribbles);
    } catch (const Error& e) {
      return error_reply(400, e.what());
    }
    if (auto bad = first_invalid_stroke(strokes, h, w)) {
      return json_reply(422, {{"error", "stroke " + std::to_string(*bad) +
                                            " is outside the image or out of range"},
                              {"index", *bad}});
    }
  }
  req.scribbles = rasterize_strokes(strokes, h, w);

  impl_->slots.acquire();
  const auto start = std::chrono::steady_clock::now();
  Reply reply;
  try {
    const Tensor out = editor::edit(req, m->c.get(), m->r.get());
    const auto png = io::encode_png(out);
    reply = Reply{200, "image/png", std::string(png.begin(), png.end()), 0.0};
  } catch (const std::exception& e) {
    reply = error_reply(500, e.what());
  }
  impl_->slots.release();
  reply.edit_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  return reply;
}

int Service::bind() {
  auto& srv = impl_->server;
  if (impl_->config.port == 0) return srv.bind_to_any_port(impl_->config.host);
  return srv.bind_to_port(impl_->config.host, impl_->config.port) ? impl_->config.port : -1;
}

bool Service::listen() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace lped::service
