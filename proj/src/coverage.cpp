#include "scenesampler/coverage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <utility>

#include "scenesampler/errors.hpp"

namespace scs {

namespace {

std::int32_t cell(double x, double voxel_size) {
  const double c = std::floor(x / voxel_size);
  if (!(c >= static_cast<double>(std::numeric_limits<std::int32_t>::min()) &&
        c <= static_cast<double>(std::numeric_limits<std::int32_t>::max()))) {
    throw InvalidInput("voxelize: coordinate outside the representable grid");
  }
  return static_cast<std::int32_t>(c);
}

// Indices within +-2^20 pack into 21-bit biased fields, ix highest, so the
// integer order of keys matches the lexicographic order of VoxelIndex.
constexpr std::int64_t kPackBias = std::int64_t{1} << 20;
constexpr std::uint64_t kPackMask = (std::uint64_t{1} << 21) - 1;

bool packable(const VoxelIndex& v) {
  auto ok = [](std::int32_t c) { return c >= -kPackBias && c < kPackBias; };
  return ok(v.ix) && ok(v.iy) && ok(v.iz);
}

std::uint64_t pack(const VoxelIndex& v) {
  auto f = [](std::int32_t c) { return static_cast<std::uint64_t>(c + kPackBias); };
  return (f(v.ix) << 42) | (f(v.iy) << 21) | f(v.iz);
}

VoxelIndex unpack(std::uint64_t k) {
  auto f = [](std::uint64_t b) { return static_cast<std::int32_t>(static_cast<std::int64_t>(b & kPackMask) - kPackBias); };
  return {f(k >> 42), f(k >> 21), f(k)};
}

// LSD radix sort on the low 63 bits, 16 bits per pass.
void radix_sort(std::vector<std::uint64_t>& keys) {
  std::vector<std::uint64_t> tmp(keys.size());
  for (int shift = 0; shift < 63; shift += 16) {
    std::vector<std::size_t> count(1u << 16, 0);
    for (std::uint64_t k : keys) ++count[(k >> shift) & 0xFFFF];
    std::size_t sum = 0;
    for (auto& c : count) sum += std::exchange(c, sum);
    for (std::uint64_t k : keys) tmp[count[(k >> shift) & 0xFFFF]++] = k;
    keys.swap(tmp);
  }
}

void sort_unique(std::vector<VoxelIndex>& v) {
  if (v.size() > 4096 && std::all_of(v.begin(), v.end(), packable)) {
    std::vector<std::uint64_t> keys(v.size());
    std::transform(v.begin(), v.end(), keys.begin(), pack);
    radix_sort(keys);
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    v.resize(keys.size());
    std::transform(keys.begin(), keys.end(), v.begin(), unpack);
    return;
  }
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    bytes_.insert(bytes_.end(), buf, buf + sizeof(T));
  }
  void put_raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw InvalidInput("coverage cache: truncated");
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'V', '3', 'D', 'C'};

}  // namespace

VoxelIndex voxel_of(const Eigen::Vector3d& p, double voxel_size) {
  return {cell(p.x(), voxel_size), cell(p.y(), voxel_size), cell(p.z(), voxel_size)};
}

SceneCoverage::SceneCoverage(std::vector<VoxelSet> frames) : frames_(std::move(frames)) {
  std::sort(frames_.begin(), frames_.end(),
            [](const VoxelSet& a, const VoxelSet& b) { return a.frame_index < b.frame_index; });
  if (!frames_.empty()) voxel_size_ = frames_.front().voxel_size;
  std::size_t total = 0;
  for (std::size_t k = 0; k < frames_.size(); ++k) {
    const VoxelSet& f = frames_[k];
    if (f.voxel_size != voxel_size_) throw InvalidInput("scene coverage: frames use different voxel sizes");
    if (!(f.voxel_size > 0.0)) throw InvalidInput("scene coverage: voxel size must be positive");
    if (k > 0 && frames_[k - 1].frame_index == f.frame_index) {
      throw InvalidInput("scene coverage: duplicate frame index " + std::to_string(f.frame_index));
    }
    if (!std::is_sorted(f.voxels.begin(), f.voxels.end()) ||
        std::adjacent_find(f.voxels.begin(), f.voxels.end()) != f.voxels.end()) {
      throw InvalidInput("scene coverage: voxel set of frame " + std::to_string(f.frame_index) +
                         " is not sorted and unique");
    }
    total += f.voxels.size();
  }
  universe_.reserve(total);
  for (const auto& f : frames_) universe_.insert(universe_.end(), f.voxels.begin(), f.voxels.end());
  sort_unique(universe_);
  universe_.shrink_to_fit();

  frame_ids_.resize(frames_.size());
  for (std::size_t k = 0; k < frames_.size(); ++k) {
    auto& ids = frame_ids_[k];
    ids.reserve(frames_[k].voxels.size());
    auto it = universe_.begin();
    for (const VoxelIndex& v : frames_[k].voxels) {
      it = std::lower_bound(it, universe_.end(), v);
      ids.push_back(static_cast<std::uint32_t>(it - universe_.begin()));
    }
  }
}

std::ptrdiff_t SceneCoverage::position_of(std::uint32_t frame_index) const {
  auto it = std::lower_bound(frames_.begin(), frames_.end(), frame_index,
                             [](const VoxelSet& f, std::uint32_t idx) { return f.frame_index < idx; });
  if (it == frames_.end() || it->frame_index != frame_index) return -1;
  return it - frames_.begin();
}

VoxelSet voxelize(const CoordinateMap& cmap, double voxel_size, std::uint32_t frame_index, int stride) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) throw InvalidInput("voxelize: voxel size must be positive");
  if (stride < 1) throw InvalidInput("voxelize: pixel stride must be >= 1");
  VoxelSet out;
  out.frame_index = frame_index;
  out.voxel_size = voxel_size;
  std::vector<VoxelIndex>& cells = out.voxels;
  for (int i = 0; i < cmap.height; i += stride) {
    bool have_prev = false;
    VoxelIndex prev;
    for (int j = 0; j < cmap.width; j += stride) {
      const std::size_t k = cmap.offset(i, j);
      if (!cmap.valid[k]) continue;
      const VoxelIndex v = voxel_of(cmap.coords[k], voxel_size);
      // Neighbouring pixels mostly share a voxel; skip the obvious repeats
      // before the sort.
      if (have_prev && v == prev) continue;
      cells.push_back(v);
      prev = v;
      have_prev = true;
    }
  }
  sort_unique(cells);
  cells.shrink_to_fit();
  return out;
}

double coverage_ratio(std::span<const VoxelSet> selected, const SceneCoverage& scene) {
  for (const auto& s : selected) {
    if (s.voxel_size != scene.voxel_size()) throw InvalidInput("coverage_ratio: voxel size mismatch");
  }
  if (scene.universe().empty()) return 1.0;
  std::vector<VoxelIndex> merged;
  for (const auto& s : selected) merged.insert(merged.end(), s.voxels.begin(), s.voxels.end());
  sort_unique(merged);
  return static_cast<double>(merged.size()) / static_cast<double>(scene.universe().size());
}

std::vector<std::uint8_t> encode_coverage_cache(const SceneCoverage& scene) {
  ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put<std::uint32_t>(kCoverageCacheVersion);
  w.put<double>(scene.voxel_size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(scene.frame_count()));
  for (const auto& f : scene.frames()) {
    w.put<std::uint32_t>(f.frame_index);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f.voxels.size()));
    for (const auto& v : f.voxels) {
      w.put<std::int32_t>(v.ix);
      w.put<std::int32_t>(v.iy);
      w.put<std::int32_t>(v.iz);
    }
  }
  return w.take();
}

SceneCoverage decode_coverage_cache(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw InvalidInput("coverage cache: bad magic");
  }
  ByteReader r(bytes.subspan(4));
  const auto version = r.get<std::uint32_t>();
  if (version != kCoverageCacheVersion) {
    throw InvalidInput("coverage cache: unsupported version " + std::to_string(version));
  }
  const double voxel_size = r.get<double>();
  const auto n_frames = r.get<std::uint32_t>();
  std::vector<VoxelSet> frames;
  frames.reserve(std::min<std::size_t>(n_frames, r.remaining() / 8));
  for (std::uint32_t f = 0; f < n_frames; ++f) {
    VoxelSet vs;
    vs.voxel_size = voxel_size;
    vs.frame_index = r.get<std::uint32_t>();
    const auto count = r.get<std::uint32_t>();
    if (static_cast<std::size_t>(count) * 12 > r.remaining()) throw InvalidInput("coverage cache: truncated");
    vs.voxels.resize(count);
    for (auto& v : vs.voxels) {
      v.ix = r.get<std::int32_t>();
      v.iy = r.get<std::int32_t>();
      v.iz = r.get<std::int32_t>();
    }
    frames.push_back(std::move(vs));
  }
  if (r.remaining() != 0) throw InvalidInput("coverage cache: trailing bytes");
  return SceneCoverage(std::move(frames));
}

void save_coverage_cache(const std::filesystem::path& path, const SceneCoverage& scene) {
  const auto bytes = encode_coverage_cache(scene);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

SceneCoverage load_coverage_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_coverage_cache(bytes);
}

}  // namespace scs
