#include "prga/synth.hpp"

#include <cmath>

#include <Eigen/QR>

#include "prga/error.hpp"
#include "prga/rng.hpp"

namespace prga {

namespace {

Eigen::VectorXd gaussian_vector(SplitMix64& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Eigen::VectorXd unit_vector(SplitMix64& rng, Eigen::Index n) {
  Eigen::VectorXd v = gaussian_vector(rng, n);
  return v / v.norm();
}

void append(std::vector<float>& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(static_cast<float>(v(i)));
}

}  // namespace

PlantedTask make_planted_task(const PlantedTaskSpec& spec) {
  const Eigen::Index d = spec.dim;
  const Eigen::Index k = spec.content_dim;
  if (spec.patches < 2) throw Error(ErrorKind::InvalidArgument, "planted task needs >= 2 patches");
  if (k < 1 || d < k + 1) throw Error(ErrorKind::InvalidArgument, "planted task needs dim >= content_dim + 1");

  SplitMix64 root(spec.seed);
  SplitMix64 basis_rng = root.split();
  SplitMix64 item_rng = root.split();
  SplitMix64 classifier_rng = root.split();

  // Random orthonormal frame: marker first, then the content subspace.
  Eigen::MatrixXd raw(d, d);
  for (Eigen::Index j = 0; j < d; ++j) raw.col(j) = gaussian_vector(basis_rng, d);
  const Eigen::MatrixXd frame = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
  const Eigen::VectorXd marker = frame.col(0);
  const Eigen::MatrixXd content = frame.middleCols(1, k);
  const double noise_scale = 1.0 / std::sqrt(static_cast<double>(d));

  PlantedTask task;
  EmbeddingBank& bank = task.bank;
  bank.dim = spec.dim;
  bank.patches_per_item = spec.patches;
  bank.class_names = {"opposed", "aligned"};

  const std::uint32_t items = 2 * spec.per_class;
  for (std::uint32_t i = 0; i < items; ++i) {
    const std::uint32_t label = i % 2;
    const std::size_t a = item_rng.below(spec.patches);
    std::size_t b = item_rng.below(spec.patches - 1);
    if (b >= a) ++b;

    const Eigen::VectorXd ca = unit_vector(item_rng, k);
    Eigen::VectorXd cb = ca + spec.spread * unit_vector(item_rng, k);
    cb.normalize();
    // sign flip keeps the dot product's magnitude and sets its sign
    if ((ca.dot(cb) > 0.0) != (label == 1)) cb = -cb;

    Eigen::MatrixXd h(static_cast<Eigen::Index>(spec.patches), d);
    for (std::size_t p = 0; p < spec.patches; ++p) {
      Eigen::VectorXd row = spec.patch_noise * noise_scale * gaussian_vector(item_rng, d);
      if (p == a || p == b) {
        row += spec.marker * marker + content * (p == a ? ca : cb);
      } else {
        row += spec.clutter * (content * unit_vector(item_rng, k));
      }
      h.row(static_cast<Eigen::Index>(p)) = row.transpose();
    }
    const Eigen::VectorXd global = h.colwise().mean().transpose() +
                                   spec.relation_gain * ca.dot(cb) * marker +
                                   spec.global_noise * noise_scale * gaussian_vector(item_rng, d);

    bank.labels.push_back(label);
    append(bank.globals, global);
    for (Eigen::Index p = 0; p < h.rows(); ++p) append(bank.patches, h.row(p).transpose());
  }

  task.classifier.classes = 2;
  task.classifier.dim = spec.dim;
  for (int c = 0; c < 2; ++c) {
    const double sign = c == 1 ? 1.0 : -1.0;
    append(task.classifier.values, sign * spec.classifier_signal * marker +
                                       spec.classifier_noise * noise_scale * gaussian_vector(classifier_rng, d));
  }
  bank.validate();
  return task;
}

}  // namespace prga
