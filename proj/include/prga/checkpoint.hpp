#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "prga/model.hpp"

namespace prga {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// CKP1, little-endian, every real stored as f32:
//   "CKP1" u32 version, u32 mode
//   u32 L, then per layer: u32 d_out, u32 d_in, u32 activation, f32 slope,
//     W (d_out x d_in row-major), a (2 d_out)
//   u32 |psi|, u32 d_out, u32 d_in, then per aggregator: u32 kind, f32 gamma,
//     W_m (d_out x d_in row-major)
//   u32 M, u32 N, u32 d, f32 alpha, f32 beta, Theta (M x d),
//     Theta_0 (M x d), L_train (M x N), W_c (N x d)
std::string encode_checkpoint(const Model& model);
Model decode_checkpoint(std::string_view bytes);

// JSON sidecar: alpha, beta, mode, aggregator list, layer count.
nlohmann::json checkpoint_sidecar(const Model& model);

// Writes `path` and `path.json`.
void write_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace prga
