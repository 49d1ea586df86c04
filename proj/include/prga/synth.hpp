#pragma once

#include <cstdint>

#include "prga/embank.hpp"

namespace prga {

// Two-class planted-relation task. Every image has two "object" patches
// carrying a shared marker direction plus a content vector; the label is the
// sign of the dot product between the two contents. Contents are drawn
// uniformly on a sphere, so each patch on its own is label-independent. The
// other patches are label-independent clutter.
//
// The global embedding plays the role of a full-image view: the patch mean,
// plus the object relation written along the marker direction, plus noise.
// W_c holds noisy prototypes along the same relation axis.
struct PlantedTaskSpec {
  std::uint32_t per_class = 104;
  std::uint32_t dim = 16;
  std::uint32_t patches = 8;
  std::uint32_t content_dim = 6;
  double marker = 1.0;          // marker strength on object patches
  double clutter = 1.0;         // content scale of clutter patches
  double patch_noise = 0.15;    // isotropic noise on every patch
  double spread = 0.3;          // how far the second content strays from +-first
  double relation_gain = 1.0;   // weight of <ca,cb> in the global view
  double global_noise = 2.0;    // isotropic noise scale of the global view
  double classifier_signal = 0.2;
  double classifier_noise = 1.0;
  std::uint64_t seed = 0;
};

struct PlantedTask {
  EmbeddingBank bank;
  ClassifierWeights classifier;
};

PlantedTask make_planted_task(const PlantedTaskSpec& spec);

}  // namespace prga
