#pragma once

#include <cstdint>
#include <vector>

#include "conceptforge/annotations.hpp"
#include "conceptforge/tensor.hpp"

namespace conceptforge {

struct SyntheticSpec {
  uint32_t n_images = 200;
  uint32_t grid_w = 14;
  uint32_t grid_h = 14;
  uint32_t channels = 512;
  uint32_t n_planted_concepts = 16;
  uint32_t placements_per_image = 4;
  /// Expected Euclidean norm of the perturbation added to a planted unit
  /// vector (per-channel standard deviation is noise_sigma / sqrt(channels)).
  double noise_sigma = 0.05;
  /// Minimum angle between planted concepts.
  double min_separation_deg = 60.0;
  /// Geometry used for grid_to_pixel; channels are taken from `channels`.
  LayerSpec layer = LayerSpec{"pool4", 512, 16, 100, 7.5};
  std::string object_class = "synthetic";
};

struct SyntheticCorpus {
  std::vector<FeatureTensor> tensors;
  std::vector<GroundTruthInstance> ground_truth;
  /// Unit vectors; concept k is annotated as part `synthetic_part_id(k)`.
  std::vector<std::vector<float>> planted_centroids;
};

std::string synthetic_part_id(uint32_t concept_index);
std::string synthetic_image_id(uint32_t image_index);

/// Deterministic given `seed`. Each image receives `placements_per_image`
/// distinct concepts at distinct random cells; every other cell holds a
/// normalized isotropic Gaussian vector. Images cycle through the five
/// viewpoint bins. Throws DataError when the spec is infeasible.
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, uint64_t seed);

}  // namespace conceptforge
