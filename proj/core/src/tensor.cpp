#include "conceptforge/tensor.hpp"

#include <cmath>

#include "conceptforge/error.hpp"

namespace conceptforge {

std::string_view to_string(Viewpoint v) {
  switch (v) {
    case Viewpoint::front: return "front";
    case Viewpoint::front_side: return "front-side";
    case Viewpoint::side: return "side";
    case Viewpoint::rear_side: return "rear-side";
    case Viewpoint::rear: return "rear";
    case Viewpoint::unknown: return "unknown";
  }
  return "unknown";
}

Viewpoint parse_viewpoint(std::string_view text) {
  for (auto v : {Viewpoint::front, Viewpoint::front_side, Viewpoint::side, Viewpoint::rear_side,
                 Viewpoint::rear, Viewpoint::unknown}) {
    if (to_string(v) == text) return v;
  }
  throw DataError("unknown viewpoint bin '" + std::string(text) + "'");
}

FeatureTensor::FeatureTensor(ImageMeta meta, LayerSpec layer, uint32_t width, uint32_t height,
                             std::vector<float> data)
    : meta_(std::move(meta)), layer_(std::move(layer)), width_(width), height_(height),
      data_(std::move(data)) {
  if (data_.size() != std::size_t{width_} * height_ * layer_.channels) {
    throw DataError("tensor " + meta_.image_id + ": data length " + std::to_string(data_.size()) +
                    " != " + std::to_string(width_) + "x" + std::to_string(height_) + "x" +
                    std::to_string(layer_.channels));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw DataError("tensor " + meta_.image_id + ": non-finite value at index " +
                      std::to_string(i));
    }
  }
}

}  // namespace conceptforge
