#include "scenesampler/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "scenesampler/errors.hpp"

namespace scs {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_tensor(const fs::path& stem, const Tensor3& t, const std::string& meta_json) {
  std::string bin(t.data.size() * sizeof(float), '\0');
  std::memcpy(bin.data(), t.data.data(), bin.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t k = 0; k < bin.size(); k += 4) std::reverse(bin.begin() + k, bin.begin() + k + 4);
  }

  nlohmann::ordered_json side;
  side["shape"] = {t.rows, t.cols, t.channels};
  side["dtype"] = "f32";
  side["order"] = "row-major";
  side["meta"] = meta_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(meta_json);

  fs::path bin_path = stem;
  bin_path += ".bin";
  fs::path json_path = stem;
  json_path += ".json";
  write_file_atomic(bin_path, bin);
  write_file_atomic(json_path, side.dump(2) + "\n");
}

Tensor3 read_tensor(const fs::path& stem, std::string* meta_json) {
  fs::path bin_path = stem;
  bin_path += ".bin";
  fs::path json_path = stem;
  json_path += ".json";

  std::ifstream js(json_path);
  if (!js) throw IoError("cannot open " + json_path.string());
  nlohmann::ordered_json side;
  try {
    side = nlohmann::ordered_json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(json_path.string() + ": " + e.what());
  }
  if (side.value("dtype", "") != "f32" || side.value("order", "") != "row-major" || !side["shape"].is_array() ||
      side["shape"].size() != 3) {
    throw InvalidInput(json_path.string() + ": unsupported tensor header");
  }
  Tensor3 t(side["shape"][0].get<int>(), side["shape"][1].get<int>(), side["shape"][2].get<int>());

  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin_path.string());
  std::string bin((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bin.size() != t.data.size() * sizeof(float)) throw InvalidInput(bin_path.string() + ": size mismatch");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t k = 0; k < bin.size(); k += 4) std::reverse(bin.begin() + k, bin.begin() + k + 4);
  }
  std::memcpy(t.data.data(), bin.data(), bin.size());
  if (meta_json) *meta_json = side["meta"].dump();
  return t;
}

}  // namespace scs
