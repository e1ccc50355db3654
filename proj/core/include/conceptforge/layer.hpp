#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "conceptforge/geometry.hpp"

namespace conceptforge {

/// Geometry of one CNN layer's response grid.
///
/// `offset` is the pixel coordinate of the receptive-field center of grid
/// cell (0, 0), using pixel-index coordinates (pixel k has center k). The
/// center of cell (i, j) is (j * stride + offset, i * stride + offset).
struct LayerSpec {
  std::string name;
  uint32_t channels = 0;
  uint32_t stride = 0;
  uint32_t rf_size = 0;
  double offset = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Frozen VGG-16 pooling-layer geometry. These constants are checked against
// a receptive-field recurrence in tests/unit/layer_test.cpp.
inline constexpr uint32_t kPool3Channels = 256;
inline constexpr uint32_t kPool3Stride = 8;
inline constexpr uint32_t kPool3RfSize = 44;
inline constexpr double kPool3Offset = 3.5;

inline constexpr uint32_t kPool4Channels = 512;
inline constexpr uint32_t kPool4Stride = 16;
inline constexpr uint32_t kPool4RfSize = 100;
inline constexpr double kPool4Offset = 7.5;

inline constexpr uint32_t kPool5Channels = 512;
inline constexpr uint32_t kPool5Stride = 32;
inline constexpr uint32_t kPool5RfSize = 212;
inline constexpr double kPool5Offset = 15.5;

/// The built-in table: pool3, pool4, pool5.
std::span<const LayerSpec> vgg16_layers();

/// Looks a layer up in the built-in table.
std::optional<LayerSpec> find_vgg16_layer(std::string_view name);

/// Like find_vgg16_layer but throws DataError for unknown names.
LayerSpec vgg16_layer(std::string_view name);

/// Throws DataError unless stride > 0, rf_size > stride and channels > 0.
void validate(const LayerSpec& layer);

/// Size of a response grid.
struct GridShape {
  uint32_t height = 0;
  uint32_t width = 0;
};

/// Center of the theoretical receptive field of `cell`. Throws DataError
/// when the cell lies outside `shape`.
Point grid_to_pixel(const LayerSpec& layer, GridPos cell, GridShape shape);

/// Theoretical receptive field of `cell` before clipping to the image.
Rect receptive_field(const LayerSpec& layer, GridPos cell);

}  // namespace conceptforge
