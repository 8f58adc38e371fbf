#include "scenesampler/posenc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scenesampler/errors.hpp"
#include "scenesampler/random.hpp"

namespace scs {

std::string_view to_string(PoolMode m) {
  switch (m) {
    case PoolMode::Average:
      return "avg";
    case PoolMode::Center:
      return "center";
    case PoolMode::MinMax:
      return "minmax";
  }
  return "unknown";
}

std::string_view to_string(PeKind k) {
  switch (k) {
    case PeKind::Sinusoidal:
      return "sin";
    case PeKind::Mlp:
      return "mlp";
    case PeKind::None:
      return "none";
  }
  return "unknown";
}

PoolMode parse_pool_mode(std::string_view name) {
  if (name == "avg") return PoolMode::Average;
  if (name == "center") return PoolMode::Center;
  if (name == "minmax") return PoolMode::MinMax;
  throw InvalidInput("unknown pooling mode '" + std::string(name) + "'");
}

PeKind parse_pe_kind(std::string_view name) {
  if (name == "sin") return PeKind::Sinusoidal;
  if (name == "mlp") return PeKind::Mlp;
  if (name == "none") return PeKind::None;
  throw InvalidInput("unknown position encoding '" + std::string(name) + "'");
}

PatchCoordGrid pool_patch_coords(const CoordinateMap& cmap, int patch_size, PoolMode mode) {
  if (patch_size < 1) throw InvalidInput("pool_patch_coords: patch size must be >= 1");
  if (cmap.height < patch_size || cmap.width < patch_size) {
    throw InvalidInput("pool_patch_coords: image smaller than one patch");
  }
  PatchCoordGrid g;
  g.rows = cmap.height / patch_size;
  g.cols = cmap.width / patch_size;
  g.channels = mode == PoolMode::MinMax ? 6 : 3;
  g.patch_size = patch_size;
  g.mode = mode;
  g.coords.assign(static_cast<std::size_t>(g.rows) * g.cols * g.channels, 0.0);
  g.valid.assign(static_cast<std::size_t>(g.rows) * g.cols, 0);

  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      double* out = g.coords.data() + g.index(r, c) * g.channels;
      const int i0 = r * patch_size;
      const int j0 = c * patch_size;
      if (mode == PoolMode::Center) {
        const int ci = i0 + patch_size / 2;
        const int cj = j0 + patch_size / 2;
        if (!cmap.is_valid(ci, cj)) continue;
        const auto& p = cmap.at(ci, cj);
        out[0] = p.x();
        out[1] = p.y();
        out[2] = p.z();
        g.valid[g.index(r, c)] = 1;
        continue;
      }

      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
      Eigen::Vector3d hi = -lo;
      int count = 0;
      for (int i = i0; i < i0 + patch_size; ++i) {
        for (int j = j0; j < j0 + patch_size; ++j) {
          if (!cmap.is_valid(i, j)) continue;
          const auto& p = cmap.at(i, j);
          sum += p;
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
          ++count;
        }
      }
      if (count == 0) continue;
      g.valid[g.index(r, c)] = 1;
      if (mode == PoolMode::Average) {
        const Eigen::Vector3d mean = sum / static_cast<double>(count);
        std::copy(mean.data(), mean.data() + 3, out);
      } else {
        std::copy(lo.data(), lo.data() + 3, out);
        std::copy(hi.data(), hi.data() + 3, out + 3);
      }
    }
  }
  return g;
}

void sinusoidal_encode(std::span<const double> coords, double grid_resolution, std::span<float> out) {
  if (coords.empty()) throw InvalidInput("sinusoidal_encode: no coordinates");
  if (!(grid_resolution > 0.0)) throw InvalidInput("sinusoidal_encode: grid resolution must be positive");
  const std::size_t block = out.size() / coords.size();
  const std::size_t pairs = block / 2;
  if (pairs == 0) {
    throw InvalidInput("sinusoidal_encode: dimension " + std::to_string(out.size()) + " too small for " +
                       std::to_string(coords.size()) + " coordinates");
  }
  std::fill(out.begin(), out.end(), 0.0f);
  for (std::size_t a = 0; a < coords.size(); ++a) {
    const double cell = std::floor(coords[a] / grid_resolution);
    float* dst = out.data() + a * block;
    for (std::size_t i = 0; i < pairs; ++i) {
      const double denom = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(block));
      const double angle = cell / denom;
      dst[2 * i] = static_cast<float>(std::sin(angle));
      dst[2 * i + 1] = static_cast<float>(std::cos(angle));
    }
  }
}

std::vector<float> sinusoidal_pe(const Eigen::Vector3d& coord, int d, double grid_resolution) {
  if (d < 6) throw InvalidInput("sinusoidal_pe: dimension must be >= 6");
  std::vector<float> out(static_cast<std::size_t>(d));
  sinusoidal_encode(std::span<const double>(coord.data(), 3), grid_resolution, out);
  return out;
}

Eigen::VectorXd mlp_pe(std::span<const double> coord, const Mlp& weights) {
  weights.validate();
  if (static_cast<Eigen::Index>(coord.size()) != weights.in_dim()) {
    throw InvalidInput("mlp_pe: weights expect " + std::to_string(weights.in_dim()) + " inputs, got " +
                       std::to_string(coord.size()));
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(coord.size()));
  for (std::size_t k = 0; k < coord.size(); ++k) x[static_cast<Eigen::Index>(k)] = coord[k];
  return weights.forward(x);
}

void PeConfig::validate(int coord_channels) const {
  if (dim < 1) throw InvalidInput("position encoding: dimension must be positive");
  if (!(grid_resolution > 0.0)) throw InvalidInput("position encoding: grid resolution must be positive");
  switch (kind) {
    case PeKind::Sinusoidal:
      if (dim < 2 * coord_channels) {
        throw InvalidInput("position encoding: dimension " + std::to_string(dim) + " too small for " +
                           std::to_string(coord_channels) + " coordinates");
      }
      break;
    case PeKind::Mlp:
      if (!mlp) throw InvalidInput("position encoding: MLP weights missing");
      mlp->validate();
      if (mlp->in_dim() != coord_channels || mlp->out_dim() != dim) {
        throw InvalidInput("position encoding: MLP shape does not match coordinates/dimension");
      }
      break;
    case PeKind::None:
      break;
  }
}

PositionEncoding encode_positions(const PatchCoordGrid& grid, const PeConfig& cfg) {
  cfg.validate(grid.channels);
  PositionEncoding pe;
  pe.dim = cfg.dim;
  pe.grid_resolution = cfg.grid_resolution;
  pe.values = Tensor3(grid.rows, grid.cols, cfg.dim);
  if (cfg.kind == PeKind::None) return pe;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (!grid.is_valid(r, c)) continue;
      std::span<const double> coords(grid.at(r, c), static_cast<std::size_t>(grid.channels));
      std::span<float> dst(pe.values.cell(r, c), static_cast<std::size_t>(cfg.dim));
      if (cfg.kind == PeKind::Sinusoidal) {
        sinusoidal_encode(coords, cfg.grid_resolution, dst);
      } else {
        const Eigen::VectorXd y = mlp_pe(coords, *cfg.mlp);
        for (int k = 0; k < cfg.dim; ++k) dst[k] = static_cast<float>(y[k]);
      }
    }
  }
  return pe;
}

FusedEmbedding fuse(const Tensor3& visual, const PositionEncoding& pe, std::uint32_t source_frame) {
  if (!visual.same_shape(pe.values)) throw InvalidInput("fuse: visual and positional shapes differ");
  FusedEmbedding out{visual, source_frame};
  for (std::size_t k = 0; k < out.values.data.size(); ++k) out.values.data[k] += pe.values.data[k];
  return out;
}

Tensor3 pseudo_features(std::uint64_t seed, std::uint32_t frame, int rows, int cols, int dim) {
  if (rows < 0 || cols < 0 || dim < 1) throw InvalidInput("pseudo_features: bad shape");
  Tensor3 t(rows, cols, dim);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::uint64_t key =
          hash_combine(hash_combine(seed, frame), (static_cast<std::uint64_t>(r) << 32) | static_cast<std::uint32_t>(c));
      SplitMix64 g(key);
      float* dst = t.cell(r, c);
      for (int k = 0; k < dim; ++k) dst[k] = static_cast<float>(g.uniform(-1.0, 1.0));
    }
  }
  return t;
}

}  // namespace scs
