#include "steerlab/bundle.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "steerlab/errors.hpp"

namespace steerlab::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_le(double v, char* out) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
}

double get_le(const char* in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const NamedArray* Bundle::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

fs::path manifest_path(const fs::path& stem) {
  fs::path p = stem;
  p += ".json";
  return p;
}

fs::path blob_path(const fs::path& stem) {
  fs::path p = stem;
  p += ".bin";
  return p;
}

fs::path normalize_stem(const fs::path& path) {
  auto ext = path.extension();
  if (ext == ".json" || ext == ".bin") {
    fs::path p = path;
    return p.replace_extension();
  }
  return path;
}

void write_bundle(const fs::path& stem, const Bundle& bundle) {
  json manifest = bundle.meta.is_null() ? json::object() : bundle.meta;
  manifest["format_version"] = kFormatVersion;
  json table = json::array();
  std::string blob;
  for (const auto& a : bundle.arrays) {
    std::size_t expect = 1;
    for (auto d : a.shape) expect *= d;
    if (expect != a.values.size())
      throw dimension_error("bundle array '" + a.name + "' has inconsistent shape");
    table.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", blob.size()}});
    const std::size_t at = blob.size();
    blob.resize(at + 8 * a.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) put_le(a.values[i], blob.data() + at + 8 * i);
  }
  manifest["tensors"] = std::move(table);
  manifest["blob"] = blob_path(stem).filename().string();
  manifest["blob_bytes"] = blob.size();
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  write_text(blob_path(stem), blob);
  write_text(manifest_path(stem), manifest.dump(2) + "\n");
}

Bundle read_bundle(const fs::path& stem_in) {
  const fs::path stem = normalize_stem(stem_in);
  json manifest = read_json(manifest_path(stem));
  if (manifest.value("format_version", 0) != kFormatVersion) {
    throw io_error(manifest_path(stem).string() + ": unsupported format_version");
  }
  const fs::path blob_file = stem.parent_path() / manifest.at("blob").get<std::string>();
  const std::string blob = read_text(blob_file);
  if (blob.size() != manifest.at("blob_bytes").get<std::size_t>()) {
    throw io_error(blob_file.string() + ": blob size does not match manifest");
  }
  Bundle bundle;
  for (const auto& t : manifest.at("tensors")) {
    NamedArray a;
    a.name = t.at("name").get<std::string>();
    a.shape = t.at("shape").get<std::vector<std::size_t>>();
    const auto offset = t.at("offset").get<std::size_t>();
    std::size_t count = 1;
    for (auto d : a.shape) count *= d;
    if (offset + 8 * count > blob.size()) {
      throw io_error(blob_file.string() + ": tensor '" + a.name + "' exceeds blob");
    }
    a.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) a.values[i] = get_le(blob.data() + offset + 8 * i);
    bundle.arrays.push_back(std::move(a));
  }
  manifest.erase("tensors");
  manifest.erase("blob");
  manifest.erase("blob_bytes");
  manifest.erase("format_version");
  bundle.meta = std::move(manifest);
  return bundle;
}

std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) throw not_found_error("file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw io_error("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw io_error(path.string() + ": " + e.what());
  }
}

std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_digest(const fs::path& path) { return digest(read_text(path)); }

}  // namespace steerlab::io
