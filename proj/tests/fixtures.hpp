#pragma once

#include <string>
#include <vector>

#include "prga/checkpoint.hpp"
#include "prga/embank.hpp"
#include "prga/rng.hpp"
#include "prga/train.hpp"

namespace fixtures {

inline float random_f32(prga::SplitMix64& rng) { return static_cast<float>(rng.normal()); }

inline prga::EmbeddingBank random_bank(prga::SplitMix64& rng, std::uint32_t items, std::uint32_t classes,
                                       std::uint32_t dim, std::uint32_t patches) {
  prga::EmbeddingBank b;
  b.dim = dim;
  b.patches_per_item = patches;
  for (std::uint32_t c = 0; c < classes; ++c) b.class_names.push_back("class_" + std::to_string(c));
  for (std::uint32_t i = 0; i < items; ++i) {
    // first N items cover every class
    b.labels.push_back(i < classes ? i : static_cast<std::uint32_t>(rng.below(classes)));
    for (std::uint32_t k = 0; k < dim; ++k) b.globals.push_back(random_f32(rng));
    for (std::uint32_t k = 0; k < dim * patches; ++k) b.patches.push_back(random_f32(rng));
  }
  return b;
}

inline prga::ClassifierWeights random_classifier(prga::SplitMix64& rng, std::uint32_t classes,
                                                 std::uint32_t dim) {
  prga::ClassifierWeights w;
  w.classes = classes;
  w.dim = dim;
  for (std::uint32_t k = 0; k < classes * dim; ++k) w.values.push_back(random_f32(rng));
  return w;
}

inline bool same_bits(const prga::EmbeddingBank& a, const prga::EmbeddingBank& b) {
  return a.dim == b.dim && a.patches_per_item == b.patches_per_item && a.class_names == b.class_names &&
         a.labels == b.labels && prga::encode_bank(a) == prga::encode_bank(b);
}

// Support set of `shots` items per class, classes in label order.
inline prga::EmbeddingBank balanced_support(prga::SplitMix64& rng, std::uint32_t classes, std::uint32_t shots,
                                            std::uint32_t dim, std::uint32_t patches) {
  prga::EmbeddingBank b = random_bank(rng, classes * shots, classes, dim, patches);
  for (std::uint32_t i = 0; i < b.labels.size(); ++i) b.labels[i] = i / shots;
  return b;
}

}  // namespace fixtures
