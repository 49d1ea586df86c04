#include "prga/checkpoint.hpp"

#include "prga/bytes.hpp"
#include "prga/embank.hpp"
#include "prga/error.hpp"

namespace prga {

namespace {

constexpr std::string_view kMagic = "CKP1";
constexpr std::uint32_t kMaxDim = 1u << 20;

void put_matrix(bytes::Writer& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
  }
}

Eigen::MatrixXd get_matrix(bytes::Reader& r, std::uint32_t rows, std::uint32_t cols) {
  r.need(std::size_t{4} * rows * cols);
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f32();
  }
  return m;
}

std::uint32_t get_dim(bytes::Reader& r, const char* what) {
  const std::size_t at = r.offset();
  const std::uint32_t v = r.u32();
  if (v == 0 || v > kMaxDim) {
    throw Error(ErrorKind::BadFormat, std::string(what) + " = " + std::to_string(v) +
                                          " at byte offset " + std::to_string(at));
  }
  return v;
}

template <typename E>
E get_enum(bytes::Reader& r, std::uint32_t count, const char* what) {
  const std::size_t at = r.offset();
  const std::uint32_t v = r.u32();
  if (v >= count) {
    throw Error(ErrorKind::BadFormat, std::string("bad ") + what + " at byte offset " + std::to_string(at));
  }
  return static_cast<E>(v);
}

}  // namespace

std::string encode_checkpoint(const Model& model) {
  model.validate();
  bytes::Writer w;
  w.magic(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.mode));

  w.u32(static_cast<std::uint32_t>(model.graph.layers.size()));
  for (const auto& layer : model.graph.layers) {
    w.u32(static_cast<std::uint32_t>(layer.out_dim()));
    w.u32(static_cast<std::uint32_t>(layer.in_dim()));
    w.u32(static_cast<std::uint32_t>(layer.activation));
    w.f32(static_cast<float>(layer.negative_slope));
    put_matrix(w, layer.weight);
    put_matrix(w, layer.attn);
  }

  const auto& pool = model.pooling;
  w.u32(static_cast<std::uint32_t>(pool.aggregators.size()));
  w.u32(static_cast<std::uint32_t>(pool.out_dim()));
  w.u32(static_cast<std::uint32_t>(pool.in_dim()));
  for (std::size_t m = 0; m < pool.aggregators.size(); ++m) {
    w.u32(static_cast<std::uint32_t>(pool.aggregators[m]));
    w.f32(static_cast<float>(pool.gamma(static_cast<Eigen::Index>(m))));
    put_matrix(w, pool.projections[m]);
  }

  const auto& cache = model.cache;
  w.u32(static_cast<std::uint32_t>(cache.key_count()));
  w.u32(static_cast<std::uint32_t>(cache.class_count()));
  w.u32(static_cast<std::uint32_t>(cache.dim()));
  w.f32(static_cast<float>(cache.alpha));
  w.f32(static_cast<float>(cache.beta));
  put_matrix(w, cache.keys);
  put_matrix(w, cache.initial_keys);
  put_matrix(w, cache.values);
  put_matrix(w, cache.classifier);
  return w.take();
}

Model decode_checkpoint(std::string_view data) {
  bytes::Reader r(data);
  r.expect_magic(kMagic);
  const std::size_t version_at = r.offset();
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw Error(ErrorKind::BadFormat, "unsupported version " + std::to_string(version) +
                                          " at byte offset " + std::to_string(version_at));
  }
  Model model;
  model.mode = get_enum<AttentionMode>(r, 4, "attention mode");

  const std::uint32_t layers = get_dim(r, "layer count");
  for (std::uint32_t l = 0; l < layers; ++l) {
    LayerParams layer;
    const std::uint32_t dout = get_dim(r, "layer d_out");
    const std::uint32_t din = get_dim(r, "layer d_in");
    layer.activation = get_enum<Activation>(r, 2, "activation");
    layer.negative_slope = r.f32();
    layer.weight = get_matrix(r, dout, din);
    layer.attn = get_matrix(r, 2 * dout, 1);
    model.graph.layers.push_back(std::move(layer));
  }

  const std::uint32_t aggs = get_dim(r, "aggregator count");
  const std::uint32_t pool_out = get_dim(r, "pooling d_out");
  const std::uint32_t pool_in = get_dim(r, "pooling d_in");
  model.pooling.gamma.resize(aggs);
  for (std::uint32_t m = 0; m < aggs; ++m) {
    model.pooling.aggregators.push_back(get_enum<Aggregator>(r, 4, "aggregator"));
    model.pooling.gamma(m) = r.f32();
    model.pooling.projections.push_back(get_matrix(r, pool_out, pool_in));
  }

  const std::uint32_t keys = get_dim(r, "key count");
  const std::uint32_t classes = get_dim(r, "class count");
  const std::uint32_t dim = get_dim(r, "cache width");
  auto& cache = model.cache;
  cache.alpha = r.f32();
  cache.beta = r.f32();
  cache.keys = get_matrix(r, keys, dim);
  cache.initial_keys = get_matrix(r, keys, dim);
  cache.values = get_matrix(r, keys, classes);
  cache.classifier = get_matrix(r, classes, dim);
  if (r.remaining() != 0) {
    throw Error(ErrorKind::BadFormat, "trailing bytes at byte offset " + std::to_string(r.offset()));
  }
  model.validate();
  return model;
}

nlohmann::json checkpoint_sidecar(const Model& model) {
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto agg : model.pooling.aggregators) aggs.push_back(std::string(to_string(agg)));
  return {{"format", "CKP1"},
          {"version", kCheckpointVersion},
          {"alpha", static_cast<float>(model.cache.alpha)},
          {"beta", static_cast<float>(model.cache.beta)},
          {"mode", std::string(to_string(model.mode))},
          {"aggregators", aggs},
          {"layers", model.graph.layers.size()}};
}

void write_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(model));
  auto sidecar = path;
  sidecar += ".json";
  write_file(sidecar, checkpoint_sidecar(model).dump(2) + "\n");
}

Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace prga
