#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conceptforge/concepts.hpp"
#include "conceptforge/geometry.hpp"
#include "conceptforge/tensor.hpp"

namespace conceptforge {

/// 8-bit RGB raster, row-major, interleaved.
struct Image {
  uint32_t width = 0;
  uint32_t height = 0;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(uint32_t w, uint32_t h, uint8_t fill = 0)
      : width(w), height(h), pixels(std::size_t{w} * h * 3, fill) {}

  uint8_t* at(uint32_t x, uint32_t y) { return &pixels[(std::size_t{y} * width + x) * 3]; }
  const uint8_t* at(uint32_t x, uint32_t y) const {
    return &pixels[(std::size_t{y} * width + x) * 3];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

std::string encode_ppm(const Image& image);
Image decode_ppm(std::string_view bytes);
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

struct PatchRef {
  std::string image_id;
  GridPos grid_pos;
  /// Theoretical receptive field, rf_size square, before clipping.
  Rect field;
  /// `field` clipped to the crop.
  Rect clipped;
  std::size_t rank = 0;
  double distance = 0.0;
};

struct TopPatches {
  std::vector<PatchRef> patches;
  /// Set when the corpus had fewer scoreable cells than requested.
  bool truncated = false;
};

/// Every scoreable cell ranked by distance to the centroid ascending (ties by
/// image id, then row-major cell index); the first `n` are returned.
TopPatches top_patches(const VisualConcept& vc, std::span<const FeatureTensor> corpus,
                       std::size_t n);

/// `k` patches drawn uniformly without replacement from the best `pool`.
TopPatches random_top_patches(const VisualConcept& vc, std::span<const FeatureTensor> corpus,
                              std::size_t k, std::size_t pool, uint64_t seed);

/// Resolves an image id to its crop-frame RGB image.
using ImageStore = std::function<std::optional<Image>(const std::string& image_id)>;

/// Looks for `<dir>/<image_id>.ppm`.
ImageStore directory_image_store(std::filesystem::path dir);

/// The receptive field of `patch` cut from `image`, out-of-image pixels
/// filled by edge replication.
Image extract_patch(const Image& image, const PatchRef& patch);

struct AverageMap {
  Image mean;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Per-pixel mean over the patches (rounded to nearest). Patches whose image
/// is missing are skipped and counted.
AverageMap average_intensity_map(std::span<const PatchRef> patches, const ImageStore& store,
                                 uint32_t rf_size);

/// Patches laid out row-major by rank, `columns` per row, 2-px black separators.
Image montage(std::span<const PatchRef> patches, const ImageStore& store, uint32_t rf_size,
              uint32_t columns);

}  // namespace conceptforge
