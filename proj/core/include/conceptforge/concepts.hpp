#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conceptforge/geometry.hpp"
#include "conceptforge/layer.hpp"
#include "conceptforge/matrix.hpp"
#include "conceptforge/tensor.hpp"

namespace conceptforge {

using Rng = std::mt19937_64;

/// Norms below this are treated as dead activations.
inline constexpr double kDegenerateNorm = 1e-12;

/// Unit vector in the direction of `v`. Throws DegenerateVectorError when
/// ||v|| < kDegenerateNorm.
std::vector<float> l2_normalize(std::span<const float> v);

/// Non-throwing variant: writes into `out` and returns false for degenerate input.
bool try_l2_normalize(std::span<const float> v, std::span<float> out);

struct PopulationSample {
  std::vector<float> vector;
  std::string image_id;
  GridPos grid_pos;

  friend bool operator==(const PopulationSample&, const PopulationSample&) = default;
};

/// Draws up to `per_image` distinct cells per tensor (all cells when
/// per_image >= W*H), l2-normalizing each; degenerate cells are skipped and
/// replaced by further cells of the same random permutation.
std::vector<PopulationSample> sample_responses(std::span<const FeatureTensor> corpus,
                                               const LayerSpec& layer, std::size_t per_image,
                                               Rng& rng);

Matrix<float> to_matrix(std::span<const PopulationSample> samples);

/// k-means++ seeding: first center uniform, later centers drawn with
/// probability proportional to squared distance to the nearest chosen one.
/// Returns K distinct rows of `data`; throws DataError if the data has fewer
/// than K distinct points.
Matrix<float> kmeans_pp_seed(const Matrix<float>& data, std::size_t k, Rng& rng,
                             unsigned threads = 1);

struct LloydOptions {
  std::size_t max_iter = 300;
  double rel_tol = 1e-6;
  unsigned threads = 1;
};

struct LloydResult {
  Matrix<double> centroids;
  std::vector<uint32_t> assignments;
  /// Sum of squared distances of the final assignments to the final centroids.
  double objective = 0.0;
  /// Objective after every assignment step.
  std::vector<double> history;
  std::size_t iterations = 0;
};

/// Standard Lloyd refinement. Nearest centroid by Euclidean distance (lowest
/// index on ties); empty clusters are reseeded to the points farthest from
/// their assigned centroids.
LloydResult lloyd(const Matrix<float>& data, const Matrix<float>& initial_centroids,
                  const LloydOptions& options = {});

struct VisualConcept {
  uint32_t id = 0;
  std::vector<float> centroid;
  uint32_t member_count = 0;

  friend bool operator==(const VisualConcept&, const VisualConcept&) = default;
};

struct DictionaryProvenance {
  uint32_t k_initial = 0;
  uint64_t seed = 0;
  /// Negative until the dictionary has been merged.
  double merge_threshold = -1.0;
  uint64_t n_samples = 0;

  friend bool operator==(const DictionaryProvenance&, const DictionaryProvenance&) = default;
};

struct ConceptDictionary {
  std::string object_class;
  LayerSpec layer;
  std::vector<VisualConcept> concepts;
  DictionaryProvenance provenance;
  /// Free-form key=value pairs echoed into the file (run configuration).
  std::vector<std::pair<std::string, std::string>> extra;

  const VisualConcept* find(uint32_t concept_id) const;

  friend bool operator==(const ConceptDictionary&, const ConceptDictionary&) = default;
};

struct LearnOptions {
  /// 0 selects layer.channels.
  std::size_t k = 0;
  uint64_t seed = 0;
  std::size_t samples_per_image = 100;
  LloydOptions lloyd;
  std::string object_class;
};

/// sample_responses -> kmeans_pp_seed -> lloyd, all driven by one RNG seeded
/// with options.seed.
ConceptDictionary learn_dictionary(std::span<const FeatureTensor> corpus, const LayerSpec& layer,
                                   const LearnOptions& options);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Greedy merging: while the most similar pair (by centroid cosine, lowest
/// (id_a, id_b) on ties) reaches `sim_threshold`, replace it by one concept
/// with the member-count-weighted mean centroid and summed count. The merged
/// concept keeps the position and id of the first concept of the pair.
ConceptDictionary merge_dictionary(const ConceptDictionary& dict, double sim_threshold);

}  // namespace conceptforge
