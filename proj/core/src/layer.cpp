#include "conceptforge/layer.hpp"

#include <array>
#include <cmath>

#include "conceptforge/error.hpp"

namespace conceptforge {

namespace {

const std::array<LayerSpec, 3> kVgg16 = {{
    {"pool3", kPool3Channels, kPool3Stride, kPool3RfSize, kPool3Offset},
    {"pool4", kPool4Channels, kPool4Stride, kPool4RfSize, kPool4Offset},
    {"pool5", kPool5Channels, kPool5Stride, kPool5RfSize, kPool5Offset},
}};

}  // namespace

std::span<const LayerSpec> vgg16_layers() { return kVgg16; }

std::optional<LayerSpec> find_vgg16_layer(std::string_view name) {
  for (const auto& layer : kVgg16) {
    if (layer.name == name) return layer;
  }
  return std::nullopt;
}

LayerSpec vgg16_layer(std::string_view name) {
  if (auto layer = find_vgg16_layer(name)) return *layer;
  throw DataError("unknown layer '" + std::string(name) + "' (expected pool3, pool4 or pool5)");
}

void validate(const LayerSpec& layer) {
  if (layer.channels == 0) throw DataError("layer " + layer.name + ": zero channels");
  if (layer.stride == 0) throw DataError("layer " + layer.name + ": zero stride");
  if (layer.rf_size <= layer.stride) {
    throw DataError("layer " + layer.name + ": receptive field must exceed stride");
  }
  if (!std::isfinite(layer.offset)) throw DataError("layer " + layer.name + ": bad offset");
}

Point grid_to_pixel(const LayerSpec& layer, GridPos cell, GridShape shape) {
  if (cell.row >= shape.height || cell.col >= shape.width) {
    throw DataError("grid cell (" + std::to_string(cell.row) + ", " + std::to_string(cell.col) +
                    ") outside " + std::to_string(shape.height) + "x" +
                    std::to_string(shape.width) + " grid");
  }
  return {cell.col * static_cast<double>(layer.stride) + layer.offset,
          cell.row * static_cast<double>(layer.stride) + layer.offset};
}

Rect receptive_field(const LayerSpec& layer, GridPos cell) {
  const double half = (static_cast<double>(layer.rf_size) - 1.0) / 2.0;
  const double cx = cell.col * static_cast<double>(layer.stride) + layer.offset;
  const double cy = cell.row * static_cast<double>(layer.stride) + layer.offset;
  const int size = static_cast<int>(layer.rf_size);
  return {static_cast<int>(std::lround(cx - half)), static_cast<int>(std::lround(cy - half)), size,
          size};
}

}  // namespace conceptforge
