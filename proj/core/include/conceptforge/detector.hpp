#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptforge/concepts.hpp"
#include "conceptforge/geometry.hpp"
#include "conceptforge/tensor.hpp"

namespace conceptforge {

/// A scored firing of one concept (or one filter channel) at one grid cell.
/// Concept scores are -||normalize(p) - centroid||; filter scores are raw
/// activations. Higher is stronger.
struct Detection {
  std::string image_id;
  uint32_t concept_id = 0;
  Point center;
  float score = 0.0f;
  GridPos grid_pos;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Row-major H x W grid of scores.
struct ScoreGrid {
  uint32_t height = 0;
  uint32_t width = 0;
  std::vector<float> scores;

  float at(GridPos cell) const { return scores[std::size_t{cell.row} * width + cell.col]; }
};

/// Per-cell -||normalize(p) - centroid||; degenerate cells score -infinity.
/// Throws DataError on a channel mismatch.
ScoreGrid score_map(const VisualConcept& vc, const FeatureTensor& tensor);

/// Default NMS radius: twice the layer stride.
double default_nms_radius(const LayerSpec& layer);

/// Greedy NMS on one image's detections: keep the best remaining detection
/// (ties by grid row, then column), drop everything within `radius_px` of it
/// (distance <= radius). Output is sorted by descending score.
std::vector<Detection> nms(std::vector<Detection> detections, double radius_px);

/// Total order used for globally ranked detection lists: score descending,
/// then image id, grid row, grid column, concept id.
bool ranks_before(const Detection& a, const Detection& b);
void sort_by_rank(std::vector<Detection>& detections);

struct DetectOptions {
  /// <= 0 selects default_nms_radius.
  double nms_radius = 0.0;
  unsigned threads = 1;
};

/// All post-NMS detections of `concept` over the corpus, ranked. Cells with
/// -infinity scores are never emitted.
std::vector<Detection> detect(const VisualConcept& vc, std::span<const FeatureTensor> corpus,
                              const LayerSpec& layer, const DetectOptions& options = {});

/// detect() for every concept of the dictionary; result[k] belongs to
/// dict.concepts[k].
std::vector<std::vector<Detection>> detect_all(const ConceptDictionary& dict,
                                               std::span<const FeatureTensor> corpus,
                                               const DetectOptions& options = {});

/// Single-filter baseline: score = raw activation of `channel`, or the
/// channel's component of the l2-normalized response when `l2_normalize` is set.
std::vector<Detection> single_filter_detect(uint32_t channel,
                                            std::span<const FeatureTensor> corpus,
                                            const LayerSpec& layer,
                                            const DetectOptions& options = {},
                                            bool l2_normalize = false);

/// Line format: `image_id concept_id x y score`, score with 9 significant
/// digits. Lines starting with '#' are header/provenance comments.
std::string format_detections(std::span<const Detection> detections,
                              std::span<const std::pair<std::string, std::string>> header = {});
std::vector<Detection> parse_detections(std::string_view text);

void write_detections(std::span<const Detection> detections, const std::filesystem::path& path,
                      std::span<const std::pair<std::string, std::string>> header = {});
std::vector<Detection> read_detections(const std::filesystem::path& path);

}  // namespace conceptforge
