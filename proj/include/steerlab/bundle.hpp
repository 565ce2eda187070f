#pragma once

// Manifest + blob storage shared by checkpoints and concept vectors.
//
// <stem>.json holds {"format_version", "blob", "blob_bytes", "tensors": [...]}
// plus caller metadata; <stem>.bin holds every tensor back to back as
// little-endian float64. Offsets in the manifest are byte offsets into the blob.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace steerlab::io {

inline constexpr int kFormatVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct Bundle {
  nlohmann::json meta;  // caller metadata, stored alongside the tensor table
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path blob_path(const std::filesystem::path& stem);

void write_bundle(const std::filesystem::path& stem, const Bundle& bundle);
Bundle read_bundle(const std::filesystem::path& stem);

// Accepts either a stem or a path ending in .json/.bin.
std::filesystem::path normalize_stem(const std::filesystem::path& path);

// Whole-file helpers used across the pipeline.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

// FNV-1a 64 over file bytes, hex encoded. Used for lineage records.
std::string file_digest(const std::filesystem::path& path);
std::string digest(std::string_view bytes);

}  // namespace steerlab::io
