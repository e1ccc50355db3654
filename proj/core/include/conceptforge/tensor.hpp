#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptforge/geometry.hpp"
#include "conceptforge/layer.hpp"

namespace conceptforge {

enum class Viewpoint : uint8_t { front, front_side, side, rear_side, rear, unknown };

/// The five named bins, in table order (excludes `unknown`).
inline constexpr Viewpoint kViewpointBins[] = {Viewpoint::front, Viewpoint::front_side,
                                               Viewpoint::side, Viewpoint::rear_side,
                                               Viewpoint::rear};

std::string_view to_string(Viewpoint v);
/// Parses "front", "front-side", ...; throws DataError for anything else.
Viewpoint parse_viewpoint(std::string_view text);

struct ImageMeta {
  std::string image_id;
  std::string object_class;
  uint32_t crop_width = 224;
  uint32_t crop_height = 224;
  Viewpoint viewpoint = Viewpoint::unknown;
  std::string source_path;

  friend bool operator==(const ImageMeta&, const ImageMeta&) = default;
};

/// One image's response grid at one layer, stored row-major as (y, x, channel).
/// Immutable after construction.
class FeatureTensor {
 public:
  FeatureTensor(ImageMeta meta, LayerSpec layer, uint32_t width, uint32_t height,
                std::vector<float> data);

  const ImageMeta& meta() const noexcept { return meta_; }
  const std::string& image_id() const noexcept { return meta_.image_id; }
  const LayerSpec& layer() const noexcept { return layer_; }
  uint32_t width() const noexcept { return width_; }
  uint32_t height() const noexcept { return height_; }
  uint32_t channels() const noexcept { return layer_.channels; }
  GridShape shape() const noexcept { return {height_, width_}; }
  std::size_t cell_count() const noexcept { return std::size_t{width_} * height_; }

  std::span<const float> data() const noexcept { return data_; }

  /// Population response at grid cell (row, col).
  std::span<const float> response(GridPos cell) const noexcept {
    return {data_.data() + (std::size_t{cell.row} * width_ + cell.col) * channels(), channels()};
  }
  std::span<const float> response(std::size_t cell_index) const noexcept {
    return {data_.data() + cell_index * channels(), channels()};
  }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

 private:
  ImageMeta meta_;
  LayerSpec layer_;
  uint32_t width_;
  uint32_t height_;
  std::vector<float> data_;
};

}  // namespace conceptforge
