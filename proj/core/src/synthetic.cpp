#include "conceptforge/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "conceptforge/error.hpp"

namespace conceptforge {

namespace {

constexpr int kMaxRejections = 10000;

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 < 1e-24);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

/// First `count` entries of a seeded Fisher-Yates shuffle of 0..n-1.
std::vector<uint32_t> draw_distinct(std::mt19937_64& rng, uint32_t n, uint32_t count) {
  std::vector<uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  for (uint32_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<uint32_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

std::string synthetic_part_id(uint32_t concept_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "part_%02u", concept_index);
  return buf;
}

std::string synthetic_image_id(uint32_t image_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%05u", image_index);
  return buf;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, uint64_t seed) {
  if (spec.channels == 0 || spec.grid_w == 0 || spec.grid_h == 0) {
    throw DataError("synthetic corpus needs a non-empty grid and channels");
  }
  if (spec.n_planted_concepts > spec.channels) {
    throw DataError("more planted concepts than channels");
  }
  if (!(spec.noise_sigma >= 0.0)) throw DataError("noise_sigma must be >= 0");
  if (spec.placements_per_image > spec.n_planted_concepts) {
    throw DataError("placements_per_image exceeds the number of planted concepts");
  }
  const uint32_t cells = spec.grid_w * spec.grid_h;
  if (spec.placements_per_image > cells) throw DataError("more placements than grid cells");

  LayerSpec layer = spec.layer;
  layer.channels = spec.channels;
  validate(layer);

  std::mt19937_64 rng(seed);
  const std::size_t dim = spec.channels;
  const double max_cos = std::cos(spec.min_separation_deg * std::acos(-1.0) / 180.0);

  std::vector<std::vector<double>> planted;
  planted.reserve(spec.n_planted_concepts);
  for (uint32_t k = 0; k < spec.n_planted_concepts; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
      auto candidate = random_unit(rng, dim);
      bool separated = true;
      for (const auto& other : planted) {
        if (dot(candidate, other) > max_cos) {
          separated = false;
          break;
        }
      }
      if (separated) {
        planted.push_back(std::move(candidate));
        placed = true;
      }
    }
    if (!placed) {
      throw DataError("could not separate planted concept " + std::to_string(k) + " after " +
                      std::to_string(kMaxRejections) + " attempts");
    }
  }

  SyntheticCorpus out;
  for (const auto& c : planted) out.planted_centroids.emplace_back(c.begin(), c.end());

  const double per_channel_sigma = spec.noise_sigma / std::sqrt(static_cast<double>(dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> buffer(dim);

  for (uint32_t img = 0; img < spec.n_images; ++img) {
    ImageMeta meta;
    meta.image_id = synthetic_image_id(img);
    meta.object_class = spec.object_class;
    meta.crop_width = spec.grid_w * layer.stride;
    meta.crop_height = spec.grid_h * layer.stride;
    meta.viewpoint = kViewpointBins[img % std::size(kViewpointBins)];

    std::vector<float> data(std::size_t{cells} * dim);
    for (uint32_t cell = 0; cell < cells; ++cell) {
      auto noise = random_unit(rng, dim);
      std::copy(noise.begin(), noise.end(), data.begin() + std::size_t{cell} * dim);
    }

    const auto concepts = draw_distinct(rng, spec.n_planted_concepts, spec.placements_per_image);
    const auto positions = draw_distinct(rng, cells, spec.placements_per_image);
    for (uint32_t p = 0; p < spec.placements_per_image; ++p) {
      const auto& c = planted[concepts[p]];
      float* dst = data.data() + std::size_t{positions[p]} * dim;
      if (spec.noise_sigma == 0.0) {
        std::copy(out.planted_centroids[concepts[p]].begin(),
                  out.planted_centroids[concepts[p]].end(), dst);
      } else {
        double norm2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          buffer[d] = c[d] + per_channel_sigma * normal(rng);
          norm2 += buffer[d] * buffer[d];
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(buffer[d] * inv);
      }
      const GridPos cell{positions[p] / spec.grid_w, positions[p] % spec.grid_w};
      GroundTruthInstance gt;
      gt.image_id = meta.image_id;
      gt.part_id = synthetic_part_id(concepts[p]);
      gt.center = grid_to_pixel(layer, cell, {spec.grid_h, spec.grid_w});
      gt.viewpoint = meta.viewpoint;
      out.ground_truth.push_back(std::move(gt));
    }
    out.tensors.emplace_back(std::move(meta), layer, spec.grid_w, spec.grid_h, std::move(data));
  }
  return out;
}

}  // namespace conceptforge
