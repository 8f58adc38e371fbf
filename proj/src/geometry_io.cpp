#include "scenesampler/geometry_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include "scenesampler/errors.hpp"

namespace scs {

namespace {

std::vector<double> read_numbers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> out;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw InvalidInput(path.string() + ": not a number: '" + token + "'");
    out.push_back(v);
  }
  return out;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Eigen::Matrix3d read_intrinsic_matrix(const std::filesystem::path& path) {
  const auto v = read_numbers(path);
  std::size_t n = 0;
  if (v.size() == 9) {
    n = 3;
  } else if (v.size() == 16) {
    n = 4;
  } else {
    throw InvalidInput(path.string() + ": expected a 3x3 or 4x4 matrix, got " + std::to_string(v.size()) +
                       " values");
  }
  Eigen::Matrix3d k;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) k(r, c) = v[r * n + c];
  if (!k.allFinite()) throw InvalidInput(path.string() + ": non-finite intrinsics");
  return k;
}

Extrinsics read_extrinsics(const std::filesystem::path& path) {
  const auto v = read_numbers(path);
  if (v.size() != 16) {
    throw InvalidInput(path.string() + ": expected 16 values, got " + std::to_string(v.size()));
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[r * 4 + c];
  try {
    return Extrinsics::from_matrix(m);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
    os << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << os.str();
}

std::pair<int, int> png_size(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InvalidInput(path.string() + ": not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidInput(path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  png_destroy_read_struct(&png, &info, nullptr);
  return {w, h};
}

DepthMap load_depth_png(const std::filesystem::path& path, double depth_scale) {
  if (!(depth_scale > 0.0)) throw InvalidInput("depth scale must be positive");
  auto f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InvalidInput(path.string() + ": not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint16_t> raw;
  std::vector<png_bytep> rows;
  int width = 0;
  int height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidInput(path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int depth_bits = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth_bits != 16 || color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidInput(path.string() + ": expected a 16-bit single-channel PNG");
  }
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  raw.resize(static_cast<std::size_t>(width) * height);
  rows.resize(height);
  for (int i = 0; i < height; ++i) rows[i] = reinterpret_cast<png_bytep>(raw.data() + static_cast<std::size_t>(i) * width);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  DepthMap out(height, width);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (raw[k] == 0) continue;
    out.values[k] = depth_from_raw(raw[k], depth_scale);
    out.valid[k] = 1;
  }
  return out;
}

void save_depth_png(const std::filesystem::path& path, const DepthMap& depth, double depth_scale) {
  if (!(depth_scale > 0.0)) throw InvalidInput("depth scale must be positive");
  std::vector<std::uint16_t> raw(depth.values.size(), 0);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (!depth.valid[k]) continue;
    const double r = std::round(static_cast<double>(depth.values[k]) * depth_scale);
    if (r < 1.0 || r > 65535.0) throw InvalidInput("depth value out of 16-bit range for " + path.string());
    raw[k] = static_cast<std::uint16_t>(r);
  }
  std::vector<png_bytep> rows(depth.height);
  for (int i = 0; i < depth.height; ++i) {
    rows[i] = reinterpret_cast<png_bytep>(raw.data() + static_cast<std::size_t>(i) * depth.width);
  }
  auto f = open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(depth.width), static_cast<png_uint_32>(depth.height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace scs
