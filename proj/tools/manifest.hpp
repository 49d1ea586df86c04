#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace prga::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Records what a run read and what it will write. Saved before any training
// output exists; the timestamp is kept out of the digest so reruns with the
// same inputs produce the same digest.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;

  nlohmann::json to_json() const;  // includes input digests, timestamp, digest
  void write(const std::filesystem::path& path) const;
};

}  // namespace prga::cli
