#include "prga/embank.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "prga/bytes.hpp"
#include "prga/error.hpp"

namespace prga {

namespace {

constexpr std::string_view kBankMagic = "EBK1";
constexpr std::string_view kClassifierMagic = "WCM1";

void check_finite(std::span<const float> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::NonFiniteValue,
                  std::string(what) + " element " + std::to_string(i) + " is not finite");
    }
  }
}

}  // namespace

std::span<const float> EmbeddingBank::global(std::size_t item) const {
  return std::span<const float>(globals).subspan(item * dim, dim);
}

std::span<const float> EmbeddingBank::patch_block(std::size_t item) const {
  const std::size_t block = static_cast<std::size_t>(patches_per_item) * dim;
  return std::span<const float>(patches).subspan(item * block, block);
}

Eigen::VectorXd EmbeddingBank::global_vector(std::size_t item) const {
  const auto g = global(item);
  Eigen::VectorXd v(dim);
  for (std::uint32_t j = 0; j < dim; ++j) v(j) = g[j];
  return v;
}

Eigen::MatrixXd EmbeddingBank::patch_matrix(std::size_t item) const {
  const auto block = patch_block(item);
  Eigen::MatrixXd h(patches_per_item, dim);
  for (std::uint32_t p = 0; p < patches_per_item; ++p) {
    for (std::uint32_t j = 0; j < dim; ++j) h(p, j) = block[p * dim + j];
  }
  return h;
}

EmbeddingBank EmbeddingBank::subset(std::span<const std::size_t> items) const {
  EmbeddingBank out;
  out.dim = dim;
  out.patches_per_item = patches_per_item;
  out.class_names = class_names;
  out.labels.reserve(items.size());
  out.globals.reserve(items.size() * dim);
  out.patches.reserve(items.size() * patches_per_item * dim);
  for (const std::size_t i : items) {
    if (i >= item_count()) {
      throw Error(ErrorKind::InvalidArgument, "subset index " + std::to_string(i) + " out of range");
    }
    out.labels.push_back(labels[i]);
    const auto g = global(i);
    out.globals.insert(out.globals.end(), g.begin(), g.end());
    const auto p = patch_block(i);
    out.patches.insert(out.patches.end(), p.begin(), p.end());
  }
  return out;
}

void EmbeddingBank::validate() const {
  if (class_names.size() < 2) {
    throw Error(ErrorKind::BadFormat, "bank needs at least 2 classes, has " +
                                          std::to_string(class_names.size()));
  }
  if (dim < 1 || patches_per_item < 1) {
    throw Error(ErrorKind::BadFormat, "bank needs d >= 1 and P >= 1");
  }
  const std::size_t m = labels.size();
  if (globals.size() != m * dim || patches.size() != m * patches_per_item * dim) {
    throw Error(ErrorKind::DimMismatch, "payload sizes do not match M, d, P");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= class_names.size()) {
      throw Error(ErrorKind::LabelOutOfRange, "item " + std::to_string(i) + " has label " +
                                                  std::to_string(labels[i]));
    }
  }
  for (const auto& name : class_names) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorKind::BadFormat, "class name longer than 65535 bytes");
    }
  }
  check_finite(globals, "global embedding");
  check_finite(patches, "patch embedding");
}

Eigen::MatrixXd ClassifierWeights::matrix() const {
  Eigen::MatrixXd w(classes, dim);
  for (std::uint32_t c = 0; c < classes; ++c) {
    for (std::uint32_t j = 0; j < dim; ++j) w(c, j) = values[c * dim + j];
  }
  return w;
}

void ClassifierWeights::validate() const {
  if (classes < 1 || dim < 1) throw Error(ErrorKind::BadFormat, "classifier needs N >= 1, d >= 1");
  if (values.size() != static_cast<std::size_t>(classes) * dim) {
    throw Error(ErrorKind::DimMismatch, "classifier payload size does not match N x d");
  }
  check_finite(values, "classifier weight");
}

std::string encode_bank(const EmbeddingBank& bank) {
  bank.validate();
  bytes::Writer w;
  w.magic(kBankMagic);
  w.u32(static_cast<std::uint32_t>(bank.item_count()));
  w.u32(bank.dim);
  w.u32(bank.patches_per_item);
  w.u32(static_cast<std::uint32_t>(bank.class_count()));
  for (const auto& name : bank.class_names) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
  }
  for (std::size_t i = 0; i < bank.item_count(); ++i) {
    w.u32(bank.labels[i]);
    for (const float v : bank.global(i)) w.f32(v);
    for (const float v : bank.patch_block(i)) w.f32(v);
  }
  return w.take();
}

EmbeddingBank decode_bank(std::string_view data) {
  bytes::Reader r(data);
  r.expect_magic(kBankMagic);
  const std::uint32_t m = r.u32();
  EmbeddingBank bank;
  bank.dim = r.u32();
  bank.patches_per_item = r.u32();
  const std::uint32_t n = r.u32();
  if (n < 2 || bank.dim < 1 || bank.patches_per_item < 1) {
    throw Error(ErrorKind::BadFormat, "header needs N >= 2, d >= 1, P >= 1 (before byte offset " +
                                          std::to_string(r.offset()) + ")");
  }
  bank.class_names.reserve(n);
  for (std::uint32_t c = 0; c < n; ++c) {
    const std::uint16_t len = r.u16();
    bank.class_names.push_back(r.text(len));
  }
  const std::size_t record = 4 + 4 * (std::size_t{bank.dim} + std::size_t{bank.patches_per_item} * bank.dim);
  r.need(record * m);
  bank.labels.reserve(m);
  bank.globals.reserve(std::size_t{m} * bank.dim);
  bank.patches.reserve(std::size_t{m} * bank.patches_per_item * bank.dim);
  for (std::uint32_t i = 0; i < m; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t label = r.u32();
    if (label >= n) {
      throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(label) + " >= N=" +
                                                  std::to_string(n) + " at byte offset " +
                                                  std::to_string(at));
    }
    bank.labels.push_back(label);
    for (std::uint32_t j = 0; j < bank.dim; ++j) bank.globals.push_back(r.f32());
    for (std::uint32_t j = 0; j < bank.patches_per_item * bank.dim; ++j) bank.patches.push_back(r.f32());
  }
  if (r.remaining() != 0) {
    throw Error(ErrorKind::BadFormat, "trailing bytes at byte offset " + std::to_string(r.offset()));
  }
  return bank;
}

EmbeddingBank load_bank(const std::filesystem::path& path) { return decode_bank(read_file(path)); }

void write_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  write_file(path, encode_bank(bank));
}

std::string encode_classifier(const ClassifierWeights& weights) {
  weights.validate();
  bytes::Writer w;
  w.magic(kClassifierMagic);
  w.u32(weights.classes);
  w.u32(weights.dim);
  for (const float v : weights.values) w.f32(v);
  return w.take();
}

ClassifierWeights decode_classifier(std::string_view data) {
  bytes::Reader r(data);
  r.expect_magic(kClassifierMagic);
  ClassifierWeights w;
  w.classes = r.u32();
  w.dim = r.u32();
  const std::size_t count = std::size_t{w.classes} * w.dim;
  r.need(4 * count);
  w.values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) w.values.push_back(r.f32());
  if (r.remaining() != 0) {
    throw Error(ErrorKind::BadFormat, "trailing bytes at byte offset " + std::to_string(r.offset()));
  }
  return w;
}

ClassifierWeights load_classifier(const std::filesystem::path& path) {
  return decode_classifier(read_file(path));
}

void write_classifier(const ClassifierWeights& weights, const std::filesystem::path& path) {
  write_file(path, encode_classifier(weights));
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!(norm > kNormEpsilon)) {
    throw Error(ErrorKind::ZeroVector, "norm " + std::to_string(norm) + " <= 1e-12");
  }
  return v / norm;
}

std::vector<Rect> tile_rects(const TileSpec& spec) {
  if (spec.image_w < 1 || spec.image_h < 1) {
    throw Error(ErrorKind::InvalidArgument, "image size must be positive");
  }
  std::vector<Rect> rects;
  for (const auto& [rows, cols] : spec.grids) {
    if (rows < 1 || cols < 1) throw Error(ErrorKind::InvalidArgument, "grid dims must be >= 1");
    if (cols > spec.image_w || rows > spec.image_h) {
      throw Error(ErrorKind::GridTooFine, std::to_string(rows) + "x" + std::to_string(cols) +
                                              " grid on " + std::to_string(spec.image_w) + "x" +
                                              std::to_string(spec.image_h) + " image");
    }
    const int tile_w = spec.image_w / cols;
    const int tile_h = spec.image_h / rows;
    for (int r = 0; r < rows; ++r) {
      const int y = r * tile_h;
      const int h = (r == rows - 1) ? spec.image_h - y : tile_h;
      for (int c = 0; c < cols; ++c) {
        const int x = c * tile_w;
        const int w = (c == cols - 1) ? spec.image_w - x : tile_w;
        rects.push_back({x, y, w, h});
      }
    }
  }
  if (spec.include_full) rects.push_back({0, 0, spec.image_w, spec.image_h});
  return rects;
}

std::vector<std::pair<int, int>> parse_grids(std::string_view text) {
  std::vector<std::pair<int, int>> grids;
  auto parse_int = [&](std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
      throw Error(ErrorKind::InvalidArgument, "bad grid component '" + std::string(s) + "'");
    }
    return v;
  };
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    const auto x = item.find('x');
    if (x == std::string_view::npos) {
      throw Error(ErrorKind::InvalidArgument, "grid '" + std::string(item) + "' is not RxC");
    }
    grids.emplace_back(parse_int(item.substr(0, x)), parse_int(item.substr(x + 1)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (grids.empty()) throw Error(ErrorKind::InvalidArgument, "empty grid list");
  return grids;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

}  // namespace prga
