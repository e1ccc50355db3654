#include "conceptforge/visualize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "binary.hpp"
#include "conceptforge/error.hpp"
#include "kernels.hpp"

namespace conceptforge {

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

Image decode_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      return;
    }
  };
  auto number = [&]() -> uint32_t {
    skip_space();
    const std::size_t start = pos;
    uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<uint64_t>(bytes[pos] - '0');
      if (v > 1u << 20) throw FormatError("PPM header value too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError("expected a number in PPM header", start);
    return static_cast<uint32_t>(v);
  };
  if (bytes.substr(0, 2) != "P6") throw FormatError("not a binary PPM (P6)", 0);
  pos = 2;
  const uint32_t w = number();
  const uint32_t h = number();
  const uint32_t maxval = number();
  if (maxval != 255) throw FormatError("only 8-bit PPM is supported", pos);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("missing whitespace after PPM header", pos);
  }
  ++pos;
  Image image(w, h);
  if (bytes.size() - pos < image.pixels.size()) throw FormatError("truncated PPM raster", pos);
  std::copy_n(bytes.data() + pos, image.pixels.size(), reinterpret_cast<char*>(image.pixels.data()));
  return image;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_ppm(image));
}

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(detail::read_file_bytes(path)); }

namespace {

struct RankedCell {
  double distance;
  std::size_t image;
  std::size_t cell;
};

std::vector<RankedCell> rank_cells(const VisualConcept& vc,
                                   std::span<const FeatureTensor> corpus) {
  std::vector<RankedCell> cells;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& t = corpus[i];
    if (t.channels() != vc.centroid.size()) {
      throw DataError("concept " + std::to_string(vc.id) + " does not match the channels of " +
                      t.image_id());
    }
    std::vector<float> unit(t.channels());
    for (std::size_t c = 0; c < t.cell_count(); ++c) {
      if (!try_l2_normalize(t.response(c), unit)) continue;
      cells.push_back(
          {std::sqrt(detail::squared_distance(unit.data(), vc.centroid.data(), unit.size())),
           i, c});
    }
  }
  return cells;
}

auto rank_order(std::span<const FeatureTensor> corpus) {
  return [corpus](const RankedCell& a, const RankedCell& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.image != b.image) return corpus[a.image].image_id() < corpus[b.image].image_id();
    return a.cell < b.cell;
  };
}

PatchRef make_ref(const RankedCell& rc, std::span<const FeatureTensor> corpus, std::size_t rank) {
  const auto& t = corpus[rc.image];
  PatchRef ref;
  ref.image_id = t.image_id();
  ref.grid_pos = {static_cast<uint32_t>(rc.cell / t.width()), static_cast<uint32_t>(rc.cell % t.width())};
  ref.field = receptive_field(t.layer(), ref.grid_pos);
  const int x0 = std::max(ref.field.x, 0);
  const int y0 = std::max(ref.field.y, 0);
  const int x1 = std::min(ref.field.x + ref.field.width, static_cast<int>(t.meta().crop_width));
  const int y1 = std::min(ref.field.y + ref.field.height, static_cast<int>(t.meta().crop_height));
  ref.clipped = {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
  ref.rank = rank;
  ref.distance = rc.distance;
  return ref;
}

std::vector<RankedCell> best_cells(const VisualConcept& vc,
                                   std::span<const FeatureTensor> corpus, std::size_t n) {
  auto cells = rank_cells(vc, corpus);
  const std::size_t take = std::min(n, cells.size());
  std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(take), cells.end(),
                    rank_order(corpus));
  cells.resize(take);
  return cells;
}

}  // namespace

TopPatches top_patches(const VisualConcept& vc, std::span<const FeatureTensor> corpus,
                       std::size_t n) {
  if (n == 0) throw DataError("top_patches needs n >= 1");
  const auto cells = best_cells(vc, corpus, n);
  TopPatches out;
  out.truncated = cells.size() < n;
  for (std::size_t r = 0; r < cells.size(); ++r) out.patches.push_back(make_ref(cells[r], corpus, r));
  return out;
}

TopPatches random_top_patches(const VisualConcept& vc, std::span<const FeatureTensor> corpus,
                              std::size_t k, std::size_t pool, uint64_t seed) {
  if (k == 0 || pool == 0) throw DataError("random_top_patches needs k >= 1 and pool >= 1");
  const auto cells = best_cells(vc, corpus, pool);
  std::vector<std::size_t> ranks(cells.size());
  std::iota(ranks.begin(), ranks.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(k, ranks.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ranks.size() - 1);
    std::swap(ranks[i], ranks[pick(rng)]);
  }
  ranks.resize(take);
  std::sort(ranks.begin(), ranks.end());
  TopPatches out;
  out.truncated = take < k;
  for (auto r : ranks) out.patches.push_back(make_ref(cells[r], corpus, r));
  return out;
}

ImageStore directory_image_store(std::filesystem::path dir) {
  return [dir = std::move(dir)](const std::string& image_id) -> std::optional<Image> {
    const auto path = dir / (image_id + ".ppm");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_ppm(path);
  };
}

Image extract_patch(const Image& image, const PatchRef& patch) {
  Image out(static_cast<uint32_t>(patch.field.width), static_cast<uint32_t>(patch.field.height));
  if (image.width == 0 || image.height == 0) return out;
  const int max_x = static_cast<int>(image.width) - 1;
  const int max_y = static_cast<int>(image.height) - 1;
  for (uint32_t v = 0; v < out.height; ++v) {
    const int sy = std::clamp(patch.field.y + static_cast<int>(v), 0, max_y);
    for (uint32_t u = 0; u < out.width; ++u) {
      const int sx = std::clamp(patch.field.x + static_cast<int>(u), 0, max_x);
      std::copy_n(image.at(static_cast<uint32_t>(sx), static_cast<uint32_t>(sy)), 3, out.at(u, v));
    }
  }
  return out;
}

AverageMap average_intensity_map(std::span<const PatchRef> patches, const ImageStore& store,
                                 uint32_t rf_size) {
  AverageMap result;
  std::vector<double> sums(std::size_t{rf_size} * rf_size * 3, 0.0);
  std::map<std::string, std::optional<Image>> cache;
  for (const auto& patch : patches) {
    auto it = cache.find(patch.image_id);
    if (it == cache.end()) it = cache.emplace(patch.image_id, store(patch.image_id)).first;
    if (!it->second) {
      ++result.skipped;
      continue;
    }
    PatchRef sized = patch;
    sized.field.width = static_cast<int>(rf_size);
    sized.field.height = static_cast<int>(rf_size);
    const Image tile = extract_patch(*it->second, sized);
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += tile.pixels[i];
    ++result.used;
  }
  result.mean = Image(rf_size, rf_size);
  if (result.used > 0) {
    for (std::size_t i = 0; i < sums.size(); ++i) {
      result.mean.pixels[i] =
          static_cast<uint8_t>(std::lround(sums[i] / static_cast<double>(result.used)));
    }
  }
  return result;
}

Image montage(std::span<const PatchRef> patches, const ImageStore& store, uint32_t rf_size,
              uint32_t columns) {
  constexpr uint32_t kGap = 2;
  if (columns == 0) throw DataError("montage needs at least one column");
  const auto n = static_cast<uint32_t>(patches.size());
  const uint32_t cols = std::max(1u, std::min(columns, n));
  const uint32_t rows = n == 0 ? 0 : (n + cols - 1) / cols;
  Image canvas(cols * rf_size + (cols + 1) * kGap, rows * rf_size + (rows + 1) * kGap);
  std::map<std::string, std::optional<Image>> cache;
  for (uint32_t i = 0; i < n; ++i) {
    const auto& patch = patches[i];
    auto it = cache.find(patch.image_id);
    if (it == cache.end()) it = cache.emplace(patch.image_id, store(patch.image_id)).first;
    if (!it->second) continue;
    PatchRef sized = patch;
    sized.field.width = static_cast<int>(rf_size);
    sized.field.height = static_cast<int>(rf_size);
    const Image tile = extract_patch(*it->second, sized);
    const uint32_t ox = kGap + (i % cols) * (rf_size + kGap);
    const uint32_t oy = kGap + (i / cols) * (rf_size + kGap);
    for (uint32_t v = 0; v < rf_size; ++v) {
      std::copy_n(tile.at(0, v), std::size_t{rf_size} * 3, canvas.at(ox, oy + v));
    }
  }
  return canvas;
}

}  // namespace conceptforge
