#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptforge/geometry.hpp"
#include "conceptforge/tensor.hpp"

namespace conceptforge {

/// Part box in crop-frame pixels; (x, y) is the top-left corner.
struct PartBox {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const PartBox&, const PartBox&) = default;
};

struct GroundTruthInstance {
  std::string image_id;
  std::string part_id;
  Point center;
  std::optional<PartBox> box;
  Viewpoint viewpoint = Viewpoint::unknown;

  friend bool operator==(const GroundTruthInstance&, const GroundTruthInstance&) = default;
};

/// Raw keypoint label -> merged part id. A target of "DISCARD" drops the record.
class MergeMap {
 public:
  static constexpr std::string_view kDiscard = "DISCARD";

  MergeMap() = default;
  explicit MergeMap(std::map<std::string, std::string, std::less<>> rules);

  /// Parses `raw_label -> merged_part_id` lines; '#' starts a comment.
  static MergeMap parse(std::string_view text);
  static MergeMap load(const std::filesystem::path& path);

  /// Shipped defaults for "car" and "motorbike"; nullopt for other classes.
  static std::optional<MergeMap> builtin(std::string_view object_class);

  /// nullopt when the label has no rule.
  std::optional<std::string_view> lookup(std::string_view raw_label) const;
  const auto& rules() const noexcept { return rules_; }

 private:
  std::map<std::string, std::string, std::less<>> rules_;
};

/// Parses annotation lines of the form
///   image_id raw_label x y [w h] [viewpoint]
/// where (x, y) is the part center. With a merge map every raw label must
/// have a rule; unknown labels are reported together in one DataError.
std::vector<GroundTruthInstance> parse_annotations(std::string_view text,
                                                   const MergeMap* merge = nullptr);
std::vector<GroundTruthInstance> load_annotations(const std::filesystem::path& path,
                                                  const MergeMap* merge = nullptr);

std::string format_annotations(std::span<const GroundTruthInstance> instances);
void write_annotations(std::span<const GroundTruthInstance> instances,
                       const std::filesystem::path& path);

/// Image ids referenced by annotations but absent from `known_image_ids`,
/// sorted and deduplicated.
std::vector<std::string> missing_annotation_images(
    std::span<const GroundTruthInstance> instances, std::span<const std::string> known_image_ids);

/// Checks the center-inside-crop invariant against the corpus metadata.
/// Returns one message per violation.
std::vector<std::string> check_annotation_bounds(std::span<const GroundTruthInstance> instances,
                                                 std::span<const ImageMeta> metas);

/// Sorted distinct part ids.
std::vector<std::string> part_ids(std::span<const GroundTruthInstance> instances);

}  // namespace conceptforge
