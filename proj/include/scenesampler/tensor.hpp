#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace scs {

/// Dense rows x cols x channels float tensor, row-major (channel fastest).
struct Tensor3 {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int rows_, int cols_, int channels_)
      : rows(rows_), cols(cols_), channels(channels_),
        data(static_cast<std::size_t>(rows_) * cols_ * channels_, 0.0f) {}

  std::size_t offset(int r, int c, int ch = 0) const {
    return (static_cast<std::size_t>(r) * cols + c) * channels + ch;
  }
  float& at(int r, int c, int ch) { return data[offset(r, c, ch)]; }
  float at(int r, int c, int ch) const { return data[offset(r, c, ch)]; }
  float* cell(int r, int c) { return data.data() + offset(r, c); }
  const float* cell(int r, int c) const { return data.data() + offset(r, c); }

  bool same_shape(const Tensor3& o) const { return rows == o.rows && cols == o.cols && channels == o.channels; }
  bool operator==(const Tensor3&) const = default;
};

/// Writes `<stem>.bin` (little-endian f32, row-major) and `<stem>.json`
/// ({shape, dtype, order, meta}). `meta_json` must be a JSON object.
/// Both files are written to temporaries and renamed into place.
void write_tensor(const std::filesystem::path& stem, const Tensor3& t, const std::string& meta_json);

/// Reads a tensor written by write_tensor; returns the sidecar meta object
/// as serialized JSON through `meta_json` when non-null.
Tensor3 read_tensor(const std::filesystem::path& stem, std::string* meta_json = nullptr);

/// Writes bytes to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace scs
