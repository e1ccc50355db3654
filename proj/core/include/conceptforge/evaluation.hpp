#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conceptforge/annotations.hpp"
#include "conceptforge/detector.hpp"
#include "conceptforge/tensor.hpp"

namespace conceptforge {

inline constexpr double kDefaultMatchRadius = 56.0;
inline constexpr std::size_t kDefaultSubsetMax = 4;
inline constexpr std::size_t kHistogramBins = 10;

enum class ApMode { continuous, voc11 };

std::string_view to_string(ApMode mode);
ApMode parse_ap_mode(std::string_view text);

/// TP/FP flags for a ranked detection list.
struct MatchResult {
  std::vector<uint8_t> is_tp;
  /// Index into the ground-truth list for TPs, -1 for FPs.
  std::vector<int64_t> matched_gt;
  std::size_t n_gt = 0;
  double match_radius = kDefaultMatchRadius;

  std::size_t true_positives() const;
};

/// Greedy matching in rank order: a detection is a TP when an unmatched
/// ground truth in the same image lies within `radius_px` (distance <=
/// radius); the nearest one is taken, ties by ground-truth index.
/// `targets` must already be restricted to the part (or part subset).
MatchResult match_detections(std::span<const Detection> ranked,
                             std::span<const GroundTruthInstance> targets,
                             double radius_px = kDefaultMatchRadius);

struct PRCurve {
  std::vector<double> recall;
  std::vector<double> precision;
  /// Absent when there is no ground truth.
  std::optional<double> ap;
};

PRCurve pr_curve(const MatchResult& match, ApMode mode = ApMode::continuous);

/// Non-interpolated AP: sum of precision at each TP rank divided by n_gt.
/// voc11 averages the interpolated precision at recall 0, 0.1, ..., 1.
/// Absent when n_gt == 0.
std::optional<double> average_precision(const MatchResult& match,
                                        ApMode mode = ApMode::continuous);
std::optional<double> average_precision(std::span<const uint8_t> is_tp, std::size_t n_gt,
                                        ApMode mode = ApMode::continuous);

/// Ground truth indexed by image and by part; parts are sorted by id so that
/// part indices order like part ids.
class GroundTruthSet {
 public:
  explicit GroundTruthSet(std::vector<GroundTruthInstance> instances);
  /// Uses a fixed part list (sorted, a superset of the instances' parts), so
  /// that restricted sets index parts like the full set.
  GroundTruthSet(std::vector<GroundTruthInstance> instances, std::vector<std::string> parts);

  std::span<const GroundTruthInstance> instances() const noexcept { return instances_; }
  std::span<const std::string> parts() const noexcept { return parts_; }
  std::size_t part_count() const noexcept { return parts_.size(); }
  uint32_t part_index_of(std::size_t gt) const noexcept { return part_index_[gt]; }
  std::optional<uint32_t> find_part(std::string_view part_id) const;
  std::size_t count(uint32_t part) const noexcept { return part_counts_[part]; }

  /// Ground-truth indices in `image_id`, ascending.
  std::span<const uint32_t> in_image(const std::string& image_id) const;

 private:
  std::vector<GroundTruthInstance> instances_;
  std::vector<std::string> parts_;
  std::vector<uint32_t> part_index_;
  std::vector<std::size_t> part_counts_;
  std::unordered_map<std::string, std::vector<uint32_t>> by_image_;
};

/// Precomputes, for one concept's ranked detections, the ground truths within
/// the match radius of each detection, so that any part subset can be
/// matched quickly.
class ConceptMatcher {
 public:
  ConceptMatcher(std::span<const Detection> ranked, const GroundTruthSet& gts, double radius_px);

  /// Matching against the union of `parts` (part indices of the set).
  MatchResult match(std::span<const uint32_t> parts) const;
  std::optional<double> ap(std::span<const uint32_t> parts, ApMode mode) const;

  std::size_t detection_count() const noexcept { return n_detections_; }

 private:
  struct Candidate {
    uint32_t gt;
    uint32_t part;
  };
  const GroundTruthSet* gts_;
  double radius_;
  std::size_t n_detections_;
  // Candidates of detection d live in [offsets_[d], offsets_[d + 1]), ordered
  // by (distance, ground-truth index).
  std::vector<std::size_t> offsets_;
  std::vector<Candidate> candidates_;
  // Per part, the ranks of detections with a candidate of that part.
  std::vector<std::vector<uint32_t>> near_by_part_;
};

/// AP of every (concept, part) pair.
struct ApMatrix {
  std::vector<uint32_t> concept_ids;
  std::vector<std::string> parts;
  std::vector<std::optional<double>> values;  // concept-major

  std::optional<double> at(std::size_t concept_index, std::size_t part_index) const {
    return values[concept_index * parts.size() + part_index];
  }
};

struct EvalOptions {
  double match_radius = kDefaultMatchRadius;
  std::size_t subset_max = kDefaultSubsetMax;
  ApMode mode = ApMode::continuous;
  unsigned threads = 1;
};

/// `detections[k]` holds the ranked detections of concept `concept_ids[k]`.
ApMatrix compute_ap_matrix(std::span<const std::vector<Detection>> detections,
                           std::span<const uint32_t> concept_ids, const GroundTruthSet& gts,
                           const EvalOptions& options);

struct BestConceptRow {
  std::string part;
  std::optional<uint32_t> concept_id;
  std::optional<double> ap;
};

struct BestConceptTable {
  std::vector<BestConceptRow> rows;
  /// Mean over parts with a defined AP.
  std::optional<double> mean_ap;
};

/// Per part, the concept with the highest AP (lowest concept position on ties).
BestConceptTable best_concept_per_part(const ApMatrix& matrix);

struct SubsetResult {
  uint32_t concept_id = 0;
  std::vector<uint32_t> parts;  // part indices, ascending
  std::optional<double> ap;
  /// Best singleton AP, for SingleSP/MultipleSP comparisons.
  std::optional<double> best_single_ap;
};

/// Exhaustive search over all part subsets of size 1..max_subset; ties go to
/// the smaller subset, then the lexicographically smaller part list.
SubsetResult best_subset_per_concept(const ConceptMatcher& matcher, std::size_t n_parts,
                                     std::size_t max_subset, ApMode mode = ApMode::continuous);

struct ApHistograms {
  std::array<std::size_t, kHistogramBins> single_sp{};
  std::array<std::size_t, kHistogramBins> multiple_sp{};
  /// best-subset cardinality -> number of concepts
  std::map<std::size_t, std::size_t> subset_sizes;
};

std::size_t histogram_bin(double ap);
ApHistograms ap_histograms(std::span<const SubsetResult> subsets);

struct ViewpointPartRow {
  std::string part;
  std::optional<double> best_ap;
  Viewpoint best_bin = Viewpoint::unknown;
  std::optional<uint32_t> concept_id;
};

struct ViewpointReport {
  /// One best-concept table per bin in kViewpointBins order.
  std::vector<std::pair<Viewpoint, BestConceptTable>> per_bin;
  std::vector<ViewpointPartRow> best_bin_rows;
  std::optional<double> best_bin_mean_ap;
  /// Images with an unknown bin, excluded from every bin.
  std::size_t excluded_images = 0;
};

/// Fills best_bin_rows and best_bin_mean_ap from per_bin.
void summarize_best_bins(ViewpointReport& report);

/// Mean of the defined APs of a best-concept table.
std::optional<double> mean_defined_ap(std::span<const BestConceptRow> rows);

/// Restricts detections and ground truth to the images of each viewpoint bin
/// and evaluates each bin separately.
ViewpointReport viewpoint_controlled_eval(
    std::span<const std::vector<Detection>> detections, std::span<const uint32_t> concept_ids,
    std::span<const GroundTruthInstance> gts,
    const std::unordered_map<std::string, Viewpoint>& image_viewpoints,
    const EvalOptions& options);

struct EvalReport {
  EvalOptions options;
  ApMatrix matrix;
  BestConceptTable best_concepts;
  /// PR curve behind every best-concept row (same order as the rows).
  std::vector<PRCurve> best_concept_curves;
  std::vector<SubsetResult> subsets;
  ApHistograms histograms;
  std::optional<ViewpointReport> viewpoint;
  std::vector<std::pair<std::string, std::string>> provenance;
};

/// Full evaluation. Viewpoint control runs when `image_viewpoints` is non-empty.
EvalReport evaluate(std::span<const std::vector<Detection>> detections,
                    std::span<const uint32_t> concept_ids,
                    std::span<const GroundTruthInstance> gts,
                    const std::unordered_map<std::string, Viewpoint>& image_viewpoints,
                    const EvalOptions& options);

/// Splits a ranked multi-concept detection list by concept, preserving order.
/// Concept ids come out ascending.
std::pair<std::vector<uint32_t>, std::vector<std::vector<Detection>>> group_by_concept(
    std::span<const Detection> detections);

}  // namespace conceptforge
