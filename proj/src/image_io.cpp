#include "lped/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "lped/error.hpp"

namespace lped::io {
namespace {

Tensor from_mat(const cv::Mat& raw, int channels, const std::string& what) {
  if (raw.empty()) fail(ErrorKind::Data, "cannot decode image " + what);
  cv::Mat img = raw;
  double scale = 1.0 / 255.0;
  if (img.depth() == CV_16U) {
    scale = 1.0 / 65535.0;
  } else if (img.depth() != CV_8U) {
    fail(ErrorKind::Data, "unsupported pixel depth in " + what);
  }
  if (img.channels() == 4) {
    cv::cvtColor(img, img, cv::COLOR_BGRA2BGR);
  }
  const bool gray_src = img.channels() == 1;
  const int want = channels == 0 ? (gray_src ? 1 : 3) : channels;
  if (want != 1 && want != 3) fail(ErrorKind::Value, "channels must be 0, 1 or 3");

  cv::Mat f;
  img.convertTo(f, CV_64F, scale);
  Tensor out(Shape{1, want, f.rows, f.cols});
  if (gray_src) {
    for (int c = 0; c < want; ++c) {
      for (int y = 0; y < f.rows; ++y) {
        const double* row = f.ptr<double>(y);
        std::copy(row, row + f.cols, out.plane(0, c) + y * f.cols);
      }
    }
    return out;
  }
  // OpenCV keeps BGR order.
  for (int y = 0; y < f.rows; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) {
      const double b = row[3 * x], g = row[3 * x + 1], r = row[3 * x + 2];
      if (want == 1) {
        out.at(0, 0, y, x) = 0.299 * r + 0.587 * g + 0.114 * b;
      } else {
        out.at(0, 0, y, x) = r;
        out.at(0, 1, y, x) = g;
        out.at(0, 2, y, x) = b;
      }
    }
  }
  return out;
}

cv::Mat to_mat8(const Tensor& image) {
  const Shape s = image.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) {
    fail(ErrorKind::Shape, "cannot encode tensor of shape " + s.str());
  }
  cv::Mat m(s.h, s.w, s.c == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < s.h; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < s.c; ++c) {
        const double v = std::clamp(image.at(0, c, y, x), 0.0, 1.0);
        const int dst = s.c == 1 ? x : 3 * x + (2 - c);
        row[dst] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return m;
}

}  // namespace

Tensor load_image(const std::filesystem::path& path, int channels) {
  if (!std::filesystem::is_regular_file(path)) {
    fail(ErrorKind::Data, "image not found: " + path.string());
  }
  return from_mat(cv::imread(path.string(), cv::IMREAD_UNCHANGED), channels,
                  path.string());
}

Tensor decode_image(std::span<const std::uint8_t> bytes, int channels) {
  if (bytes.empty()) fail(ErrorKind::Data, "empty image payload");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(bytes.data()));
  return from_mat(cv::imdecode(buf, cv::IMREAD_UNCHANGED), channels,
                  "payload");
}

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_mat8(image), out)) {
    fail(ErrorKind::Io, "PNG encoding failed");
  }
  return out;
}

void save_png(const Tensor& image, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), to_mat8(image))) {
    fail(ErrorKind::Io, "cannot write " + path.string());
  }
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorKind::Data, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tensor resize_center_crop(const Tensor& image, int size) {
  const Shape s = image.shape();
  const double factor = static_cast<double>(size) / std::min(s.h, s.w);
  const int rh = std::max(size, static_cast<int>(std::lround(s.h * factor)));
  const int rw = std::max(size, static_cast<int>(std::lround(s.w * factor)));
  const int interp = factor < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR;
  const int oy = (rh - size) / 2;
  const int ox = (rw - size) / 2;
  Tensor out(Shape{s.n, s.c, size, size});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      cv::Mat src(s.h, s.w, CV_64F, const_cast<double*>(image.plane(n, c)));
      cv::Mat dst;
      if (rh == s.h && rw == s.w) {
        dst = src;
      } else {
        cv::resize(src, dst, cv::Size(rw, rh), 0, 0, interp);
      }
      for (int y = 0; y < size; ++y) {
        const double* row = dst.ptr<double>(y + oy) + ox;
        std::copy(row, row + size, out.plane(n, c) + y * size);
      }
    }
  }
  return out;
}

}  // namespace lped::io
