#include "relcon/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "relcon/errors.hpp"

namespace relcon {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "relcon-checkpoint-v1";

void write_le_doubles(std::ofstream& out, const std::vector<double>& v) {
  // Serialized little-endian; on the supported targets this is the native
  // representation.
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& hyper_json,
                     const std::vector<CheckpointEntry>& entries) {
  json header;
  header["format"] = kFormatTag;
  try {
    header["hyper"] = hyper_json.empty() ? json::object()
                                         : json::parse(hyper_json);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("save_checkpoint: hyper is not valid JSON: ") +
                      e.what());
  }

  json manifest = json::array();
  std::size_t offset = 0;
  for (const auto& entry : entries) {
    json item;
    item["name"] = entry.name;
    item["shape"] = entry.tensor.shape();
    item["offset"] = offset;
    manifest.push_back(item);
    offset += entry.tensor.size() * sizeof(double);
  }
  header["manifest"] = manifest;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("save_checkpoint: cannot open '" + path + "' for writing");
  }
  out << header.dump() << "\n";
  for (const auto& entry : entries) {
    write_le_doubles(out, entry.tensor.values());
  }
  if (!out) {
    throw DataError("save_checkpoint: write failed for '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("load_checkpoint: cannot open '" + path + "'");
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw DataError("load_checkpoint: missing header in '" + path + "'");
  }
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::parse_error& e) {
    throw DataError("load_checkpoint: malformed header in '" + path + "': " +
                    e.what());
  }
  if (header.value("format", "") != kFormatTag) {
    throw DataError("load_checkpoint: '" + path +
                    "' is not a recognized checkpoint file");
  }

  const std::streampos payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const std::size_t payload_bytes =
      static_cast<std::size_t>(in.tellg() - payload_start);

  Checkpoint ckpt;
  ckpt.hyper_json = header.value("hyper", json::object()).dump();

  if (!header.contains("manifest") || !header["manifest"].is_array()) {
    throw DataError("load_checkpoint: manifest missing in '" + path + "'");
  }
  for (const auto& item : header["manifest"]) {
    const std::string name = item.value("name", "");
    if (name.empty()) {
      throw DataError("load_checkpoint: manifest entry without a name");
    }
    std::vector<std::size_t> shape =
        item.value("shape", std::vector<std::size_t>{});
    const std::size_t offset = item.value("offset", std::size_t{0});
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    if (shape.empty() || count == 0) {
      throw DataError("load_checkpoint: invalid shape for tensor '" + name +
                      "'");
    }
    if (offset + count * sizeof(double) > payload_bytes) {
      throw DataError("load_checkpoint: tensor '" + name +
                      "' extends past end of payload");
    }
    std::vector<double> data(count);
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) {
      throw DataError("load_checkpoint: short read for tensor '" + name + "'");
    }
    ckpt.entries.push_back({name, Tensor(std::move(shape), std::move(data))});
  }
  return ckpt;
}

}  // namespace relcon
