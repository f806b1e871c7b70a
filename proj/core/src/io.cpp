#include "walnet/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "walnet/errors.hpp"

namespace walnet::io {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_png(const fs::path& path, const cv::Mat& mat) {
  ensure_parent(path);
  if (!cv::imwrite(path.string(), mat)) throw InputError("cannot write image " + path.string());
}

cv::Mat decode(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("image not found: " + path.string());
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw InputError("cannot decode image " + path.string());
  return mat;
}

}  // namespace

data::RawImage read_image(const fs::path& path) {
  cv::Mat mat = decode(path);
  if (mat.depth() != CV_8U && mat.depth() != CV_16U) {
    throw InputError("unsupported bit depth in " + path.string());
  }
  if (mat.channels() == 4) cv::cvtColor(mat, mat, cv::COLOR_BGRA2RGB);
  else if (mat.channels() == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  else if (mat.channels() != 1) throw InputError("unsupported channel count in " + path.string());

  data::RawImage raw;
  raw.channels = mat.channels();
  raw.rows = mat.rows;
  raw.cols = mat.cols;
  raw.max_value = mat.depth() == CV_8U ? 255.0 : 65535.0;
  raw.planar.resize(static_cast<std::size_t>(raw.channels) * raw.rows * raw.cols);
  const std::size_t plane = static_cast<std::size_t>(raw.rows) * raw.cols;
  for (int r = 0; r < raw.rows; ++r) {
    for (int c = 0; c < raw.cols; ++c) {
      for (int ch = 0; ch < raw.channels; ++ch) {
        const double v = mat.depth() == CV_8U
                             ? mat.ptr<std::uint8_t>(r)[c * raw.channels + ch]
                             : mat.ptr<std::uint16_t>(r)[c * raw.channels + ch];
        raw.planar[ch * plane + static_cast<std::size_t>(r) * raw.cols + c] = v;
      }
    }
  }
  return raw;
}

imaging::BinaryMask read_mask(const fs::path& path) {
  cv::Mat mat = decode(path);
  if (mat.channels() != 1) cv::cvtColor(mat, mat, cv::COLOR_BGR2GRAY);
  imaging::BinaryMask mask(mat.rows, mat.cols);
  for (int r = 0; r < mat.rows; ++r) {
    for (int c = 0; c < mat.cols; ++c) {
      const double v = mat.depth() == CV_8U ? mat.ptr<std::uint8_t>(r)[c] : mat.ptr<std::uint16_t>(r)[c];
      mask(r, c) = v != 0 ? 1 : 0;
    }
  }
  return mask;
}

void write_image(const fs::path& path, const imaging::RasterImage& img) {
  const int ch = img.channels();
  cv::Mat mat(img.rows(), img.cols(), ch == 1 ? CV_8UC1 : CV_8UC3);
  for (int r = 0; r < img.rows(); ++r) {
    auto* row = mat.ptr<std::uint8_t>(r);
    for (int c = 0; c < img.cols(); ++c) {
      // OpenCV stores colour as BGR.
      for (int k = 0; k < ch; ++k) row[c * ch + k] = to_byte(img.at(ch == 1 ? 0 : ch - 1 - k, r, c));
    }
  }
  write_png(path, mat);
}

void write_gray(const fs::path& path, const imaging::ScalarMap& map) {
  cv::Mat mat(map.rows(), map.cols(), CV_8UC1);
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) mat.at<std::uint8_t>(r, c) = to_byte(map(r, c));
  }
  write_png(path, mat);
}

void write_mask(const fs::path& path, const imaging::BinaryMask& mask) {
  cv::Mat mat(mask.rows(), mask.cols(), CV_8UC1);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) mat.at<std::uint8_t>(r, c) = mask(r, c) ? 255 : 0;
  }
  write_png(path, mat);
}

void write_rgb(const fs::path& path, int rows, int cols, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(rows) * cols * 3) {
    throw InputError("write_rgb: buffer size does not match dimensions");
  }
  cv::Mat mat(rows, cols, CV_8UC3, const_cast<std::uint8_t*>(rgb.data()));
  cv::Mat bgr;
  cv::cvtColor(mat, bgr, cv::COLOR_RGB2BGR);
  write_png(path, bgr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << text;
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace walnet::io
