#include "conceptforge/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "binary.hpp"
#include "conceptforge/error.hpp"
#include "conceptforge/parallel.hpp"
#include "keyvalue.hpp"
#include "kernels.hpp"

namespace conceptforge {

namespace {

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

void check_channels(const VisualConcept& vc, const FeatureTensor& tensor) {
  if (vc.centroid.size() != tensor.channels()) {
    throw DataError("concept " + std::to_string(vc.id) + " has " +
                    std::to_string(vc.centroid.size()) + " channels, tensor " +
                    tensor.image_id() + " has " + std::to_string(tensor.channels()));
  }
}

/// l2-normalized responses of every cell; `valid[c]` is false for dead cells.
struct NormalizedGrid {
  std::vector<float> data;
  std::vector<uint8_t> valid;
};

NormalizedGrid normalize_grid(const FeatureTensor& tensor) {
  NormalizedGrid g;
  const std::size_t cells = tensor.cell_count();
  const std::size_t dim = tensor.channels();
  g.data.resize(cells * dim);
  g.valid.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    g.valid[c] = try_l2_normalize(tensor.response(c), {g.data.data() + c * dim, dim});
  }
  return g;
}

std::vector<Detection> grid_detections(const ScoreGrid& grid, const FeatureTensor& tensor,
                                       uint32_t concept_id) {
  std::vector<Detection> out;
  out.reserve(grid.scores.size());
  for (uint32_t r = 0; r < grid.height; ++r) {
    for (uint32_t c = 0; c < grid.width; ++c) {
      const float s = grid.scores[std::size_t{r} * grid.width + c];
      if (s == kNegInf) continue;
      const GridPos cell{r, c};
      out.push_back({tensor.image_id(), concept_id,
                     grid_to_pixel(tensor.layer(), cell, tensor.shape()), s, cell});
    }
  }
  return out;
}

double resolve_radius(const DetectOptions& options, const LayerSpec& layer) {
  return options.nms_radius > 0 ? options.nms_radius : default_nms_radius(layer);
}

void check_layer(const FeatureTensor& tensor, const LayerSpec& layer) {
  if (tensor.channels() != layer.channels) {
    throw DataError(tensor.image_id() + ": " + std::to_string(tensor.channels()) +
                    " channels, layer " + layer.name + " expects " +
                    std::to_string(layer.channels));
  }
}

std::string format_score(float score) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(score));
  return buf;
}

}  // namespace

ScoreGrid score_map(const VisualConcept& vc, const FeatureTensor& tensor) {
  check_channels(vc, tensor);
  const std::size_t dim = tensor.channels();
  ScoreGrid grid{tensor.height(), tensor.width(), std::vector<float>(tensor.cell_count())};
  std::vector<float> unit(dim);
  for (std::size_t c = 0; c < tensor.cell_count(); ++c) {
    if (!try_l2_normalize(tensor.response(c), unit)) {
      grid.scores[c] = kNegInf;
      continue;
    }
    grid.scores[c] = static_cast<float>(
        -std::sqrt(detail::squared_distance(unit.data(), vc.centroid.data(), dim)));
  }
  return grid;
}

double default_nms_radius(const LayerSpec& layer) { return 2.0 * layer.stride; }

std::vector<Detection> nms(std::vector<Detection> detections, double radius_px) {
  std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.grid_pos < b.grid_pos;
  });
  const double r2 = radius_px * radius_px;
  std::vector<uint8_t> suppressed(detections.size(), 0);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(detections[i]);
    for (std::size_t j = i + 1; j < detections.size(); ++j) {
      if (!suppressed[j] && squared_distance(detections[i].center, detections[j].center) <= r2) {
        suppressed[j] = 1;
      }
    }
  }
  return kept;
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  if (a.grid_pos != b.grid_pos) return a.grid_pos < b.grid_pos;
  return a.concept_id < b.concept_id;
}

void sort_by_rank(std::vector<Detection>& detections) {
  std::stable_sort(detections.begin(), detections.end(), ranks_before);
}

std::vector<Detection> detect(const VisualConcept& vc, std::span<const FeatureTensor> corpus,
                              const LayerSpec& layer, const DetectOptions& options) {
  const double radius = resolve_radius(options, layer);
  std::vector<std::vector<Detection>> per_image(corpus.size());
  parallel_for(corpus.size(), options.threads, [&](std::size_t i) {
    check_layer(corpus[i], layer);
    per_image[i] = nms(grid_detections(score_map(vc, corpus[i]), corpus[i], vc.id), radius);
  });
  std::vector<Detection> all;
  for (auto& dets : per_image) all.insert(all.end(), dets.begin(), dets.end());
  sort_by_rank(all);
  return all;
}

std::vector<std::vector<Detection>> detect_all(const ConceptDictionary& dict,
                                               std::span<const FeatureTensor> corpus,
                                               const DetectOptions& options) {
  const double radius = resolve_radius(options, dict.layer);
  const std::size_t n_concepts = dict.concepts.size();
  // per_image[i][k]: post-NMS detections of concept k in image i.
  std::vector<std::vector<std::vector<Detection>>> per_image(corpus.size());
  parallel_for(corpus.size(), options.threads, [&](std::size_t i) {
    const auto& tensor = corpus[i];
    check_layer(tensor, dict.layer);
    const auto grid = normalize_grid(tensor);
    const std::size_t dim = tensor.channels();
    per_image[i].resize(n_concepts);
    ScoreGrid scores{tensor.height(), tensor.width(), std::vector<float>(tensor.cell_count())};
    for (std::size_t k = 0; k < n_concepts; ++k) {
      const auto& vc = dict.concepts[k];
      check_channels(vc, tensor);
      for (std::size_t c = 0; c < tensor.cell_count(); ++c) {
        scores.scores[c] =
            grid.valid[c]
                ? static_cast<float>(-std::sqrt(detail::squared_distance(
                      grid.data.data() + c * dim, vc.centroid.data(), dim)))
                : kNegInf;
      }
      per_image[i][k] = nms(grid_detections(scores, tensor, vc.id), radius);
    }
  });
  std::vector<std::vector<Detection>> out(n_concepts);
  parallel_for(n_concepts, options.threads, [&](std::size_t k) {
    for (auto& image : per_image) {
      out[k].insert(out[k].end(), image[k].begin(), image[k].end());
    }
    sort_by_rank(out[k]);
  });
  return out;
}

std::vector<Detection> single_filter_detect(uint32_t channel,
                                            std::span<const FeatureTensor> corpus,
                                            const LayerSpec& layer, const DetectOptions& options,
                                            bool l2_normalize) {
  if (channel >= layer.channels) {
    throw DataError("channel " + std::to_string(channel) + " out of range for layer " +
                    layer.name + " with " + std::to_string(layer.channels) + " channels");
  }
  const double radius = resolve_radius(options, layer);
  std::vector<std::vector<Detection>> per_image(corpus.size());
  parallel_for(corpus.size(), options.threads, [&](std::size_t i) {
    const auto& tensor = corpus[i];
    check_layer(tensor, layer);
    ScoreGrid scores{tensor.height(), tensor.width(), std::vector<float>(tensor.cell_count())};
    std::vector<float> unit(tensor.channels());
    for (std::size_t c = 0; c < tensor.cell_count(); ++c) {
      const auto response = tensor.response(c);
      if (!l2_normalize) {
        scores.scores[c] = response[channel];
      } else {
        scores.scores[c] = try_l2_normalize(response, unit) ? unit[channel] : kNegInf;
      }
    }
    per_image[i] = nms(grid_detections(scores, tensor, channel), radius);
  });
  std::vector<Detection> all;
  for (auto& dets : per_image) all.insert(all.end(), dets.begin(), dets.end());
  sort_by_rank(all);
  return all;
}

std::string format_detections(std::span<const Detection> detections,
                              std::span<const std::pair<std::string, std::string>> header) {
  std::string out;
  for (const auto& [k, v] : header) out += "# " + k + "=" + v + "\n";
  for (const auto& d : detections) {
    out += d.image_id + ' ' + std::to_string(d.concept_id) + ' ' +
           detail::format_double(d.center.x) + ' ' + detail::format_double(d.center.y) + ' ' +
           format_score(d.score) + '\n';
  }
  return out;
}

std::vector<Detection> parse_detections(std::string_view text) {
  std::vector<Detection> out;
  detail::for_each_line(text, [&](std::size_t number, std::string_view line) {
    if (!line.empty() && line.front() == '#') return;
    auto fields = detail::split_fields(line);
    if (fields.empty()) return;
    auto fail = [&](const std::string& why) {
      return DataError("detection line " + std::to_string(number) + ": " + why);
    };
    if (fields.size() != 5) throw fail("expected 5 fields");
    Detection d;
    d.image_id = std::string(fields[0]);
    auto id = detail::parse_number<uint32_t>(fields[1]);
    auto x = detail::parse_number<double>(fields[2]);
    auto y = detail::parse_number<double>(fields[3]);
    auto score = detail::parse_number<float>(fields[4]);
    if (!id || !x || !y || !score) throw fail("malformed number");
    d.concept_id = *id;
    d.center = {*x, *y};
    d.score = *score;
    out.push_back(std::move(d));
  });
  return out;
}

void write_detections(std::span<const Detection> detections, const std::filesystem::path& path,
                      std::span<const std::pair<std::string, std::string>> header) {
  detail::write_file_bytes(path, format_detections(detections, header));
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  return parse_detections(detail::read_file_bytes(path));
}

}  // namespace conceptforge
