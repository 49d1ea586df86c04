#include "manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "prga/embank.hpp"

namespace prga::cli {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["tool"] = "prga";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config"] = config;
  j["inputs"] = nlohmann::json::array();
  for (const auto& p : inputs) {
    j["inputs"].push_back({{"path", p.string()}, {"fnv1a64", hex64(fnv1a64(read_file(p)))}});
  }
  j["outputs"] = nlohmann::json::array();
  for (const auto& p : outputs) j["outputs"].push_back(p.string());
  // digest first, then the timestamp, which must not feed into it
  j["digest"] = hex64(fnv1a64(j.dump()));
  j["timestamp"] = utc_now();
  return j;
}

void RunManifest::write(const std::filesystem::path& path) const { write_file(path, to_json().dump(2) + "\n"); }

}  // namespace prga::cli
