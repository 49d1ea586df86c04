#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace prga {

// Precomputed image embeddings: one global vector plus P patch vectors per
// item. Payload is kept in f32 so that files round-trip bit for bit.
struct EmbeddingBank {
  std::uint32_t dim = 0;
  std::uint32_t patches_per_item = 0;
  std::vector<std::string> class_names;
  std::vector<std::uint32_t> labels;
  std::vector<float> globals;  // item_count x dim, row-major
  std::vector<float> patches;  // item_count x patches_per_item x dim

  std::size_t item_count() const { return labels.size(); }
  std::size_t class_count() const { return class_names.size(); }

  std::span<const float> global(std::size_t item) const;
  std::span<const float> patch_block(std::size_t item) const;

  Eigen::VectorXd global_vector(std::size_t item) const;
  // P x dim, one patch per row.
  Eigen::MatrixXd patch_matrix(std::size_t item) const;

  // Items in the given order; class names and dims are kept.
  EmbeddingBank subset(std::span<const std::size_t> items) const;

  // Throws on any broken invariant (N >= 2, P >= 1, d >= 1, labels < N,
  // consistent payload sizes, finite values).
  void validate() const;
};

// Zero-shot class prototypes W_c, one row per class.
struct ClassifierWeights {
  std::uint32_t classes = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // classes x dim, row-major

  Eigen::MatrixXd matrix() const;
  void validate() const;
};

// EBK1: "EBK1" u32 M, u32 d, u32 P, u32 N, N x (u16 len + UTF-8 name),
// then M x ([u32 label][d f32 global][P*d f32 patches]). Little-endian.
std::string encode_bank(const EmbeddingBank& bank);
EmbeddingBank decode_bank(std::string_view bytes);
EmbeddingBank load_bank(const std::filesystem::path& path);
void write_bank(const EmbeddingBank& bank, const std::filesystem::path& path);

// WCM1: "WCM1" u32 N, u32 d, N*d f32 row-major.
std::string encode_classifier(const ClassifierWeights& weights);
ClassifierWeights decode_classifier(std::string_view bytes);
ClassifierWeights load_classifier(const std::filesystem::path& path);
void write_classifier(const ClassifierWeights& weights, const std::filesystem::path& path);

inline constexpr double kNormEpsilon = 1e-12;

// Unit-norm copy of v; throws ZeroVector when ||v|| <= kNormEpsilon.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

struct TileSpec {
  int image_w = 0;
  int image_h = 0;
  std::vector<std::pair<int, int>> grids;  // (rows, cols)
  bool include_full = false;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Row-major per grid, grids in order, full image last. Remainder pixels go
// to the last row / column of each grid.
std::vector<Rect> tile_rects(const TileSpec& spec);

// "3x3,4x4" -> {(3,3), (4,4)}.
std::vector<std::pair<int, int>> parse_grids(std::string_view text);

// Raw file helpers shared by every binary format.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace prga
