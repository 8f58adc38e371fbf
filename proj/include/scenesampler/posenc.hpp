#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "scenesampler/geometry.hpp"
#include "scenesampler/mlp.hpp"
#include "scenesampler/tensor.hpp"

namespace scs {

inline constexpr double kDefaultGridResolution = 0.02;

enum class PoolMode { Average, Center, MinMax };
enum class PeKind { Sinusoidal, Mlp, None };

std::string_view to_string(PoolMode m);
std::string_view to_string(PeKind k);
PoolMode parse_pool_mode(std::string_view name);  // avg | center | minmax
PeKind parse_pe_kind(std::string_view name);      // sin | mlp | none

/// Per-patch aggregated coordinates. channels is 3, or 6 for MinMax
/// (min xyz followed by max xyz).
struct PatchCoordGrid {
  int rows = 0;
  int cols = 0;
  int channels = 3;
  int patch_size = 1;
  PoolMode mode = PoolMode::Average;
  std::vector<double> coords;
  std::vector<std::uint8_t> valid;

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
  const double* at(int r, int c) const { return coords.data() + index(r, c) * channels; }
  bool is_valid(int r, int c) const { return valid[index(r, c)] != 0; }
};

/// Splits the map into floor(H/P) x floor(W/P) patches (trailing rows and
/// columns dropped) and aggregates the valid pixels of each:
///   Average - mean over valid pixels (not over P*P);
///   Center  - pixel (r*P + P/2, c*P + P/2), invalid if that pixel is;
///   MinMax  - componentwise min and max.
/// Patches without a usable pixel are marked invalid and hold zeros.
PatchCoordGrid pool_patch_coords(const CoordinateMap& cmap, int patch_size, PoolMode mode);

/// Sinusoidal encoding of several coordinates into `out` (length d).
/// Each coordinate gets a block of floor(d / n) dims; within a block pair i
/// holds sin and cos of floor(x / grid_resolution) / 10000^(2i / block).
/// Only floor(block / 2) pairs are filled; all remaining dims are zero.
void sinusoidal_encode(std::span<const double> coords, double grid_resolution, std::span<float> out);

/// x || y || z encoding of a point; d >= 6.
std::vector<float> sinusoidal_pe(const Eigen::Vector3d& coord, int d, double grid_resolution);

/// Learned-style encoding: the MLP applied to the raw coordinates.
Eigen::VectorXd mlp_pe(std::span<const double> coord, const Mlp& weights);

struct PeConfig {
  PeKind kind = PeKind::Sinusoidal;
  int dim = 64;
  double grid_resolution = kDefaultGridResolution;
  std::optional<Mlp> mlp;  // required for PeKind::Mlp

  void validate(int coord_channels) const;
};

struct PositionEncoding {
  Tensor3 values;
  int dim = 0;
  double grid_resolution = kDefaultGridResolution;
};

/// Encodes every valid patch; invalid patches get the zero vector.
PositionEncoding encode_positions(const PatchCoordGrid& grid, const PeConfig& cfg);

struct FusedEmbedding {
  Tensor3 values;
  std::uint32_t source_frame = 0;
};

/// Elementwise visual + positional.
FusedEmbedding fuse(const Tensor3& visual, const PositionEncoding& pe, std::uint32_t source_frame = 0);

/// Deterministic stand-in for image-encoder features: every element is a
/// hash of (seed, frame, row, col, channel) mapped into [-1, 1).
Tensor3 pseudo_features(std::uint64_t seed, std::uint32_t frame, int rows, int cols, int dim);

}  // namespace scs
