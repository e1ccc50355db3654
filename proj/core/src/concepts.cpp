#include "conceptforge/concepts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "conceptforge/error.hpp"
#include "conceptforge/parallel.hpp"
#include "kernels.hpp"

namespace conceptforge {

namespace {

constexpr std::size_t kChunk = 512;

}  // namespace

bool try_l2_normalize(std::span<const float> v, std::span<float> out) {
  double norm2 = 0.0;
  for (float x : v) norm2 += double{x} * x;
  const double norm = std::sqrt(norm2);
  if (!(norm >= kDegenerateNorm)) return false;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  return true;
}

std::vector<float> l2_normalize(std::span<const float> v) {
  std::vector<float> out(v.size());
  if (!try_l2_normalize(v, out)) {
    throw DegenerateVectorError("cannot normalize a vector with norm below 1e-12");
  }
  return out;
}

std::vector<PopulationSample> sample_responses(std::span<const FeatureTensor> corpus,
                                               const LayerSpec& layer, std::size_t per_image,
                                               Rng& rng) {
  if (per_image == 0) throw DataError("per_image must be at least 1");
  std::vector<PopulationSample> samples;
  std::vector<float> unit(layer.channels);
  std::vector<uint32_t> order;
  for (const auto& tensor : corpus) {
    if (tensor.channels() != layer.channels) {
      throw DataError(tensor.image_id() + ": " + std::to_string(tensor.channels()) +
                      " channels, layer " + layer.name + " expects " +
                      std::to_string(layer.channels));
    }
    const auto cells = static_cast<uint32_t>(tensor.cell_count());
    order.resize(cells);
    std::iota(order.begin(), order.end(), 0u);
    std::size_t taken = 0;
    for (uint32_t i = 0; i < cells && taken < per_image; ++i) {
      std::uniform_int_distribution<uint32_t> pick(i, cells - 1);
      std::swap(order[i], order[pick(rng)]);
      const uint32_t cell = order[i];
      if (!try_l2_normalize(tensor.response(cell), unit)) continue;
      samples.push_back({unit, tensor.image_id(), GridPos{cell / tensor.width(), cell % tensor.width()}});
      ++taken;
    }
  }
  return samples;
}

Matrix<float> to_matrix(std::span<const PopulationSample> samples) {
  if (samples.empty()) return {};
  const std::size_t dim = samples.front().vector.size();
  std::vector<float> data;
  data.reserve(samples.size() * dim);
  for (const auto& s : samples) {
    if (s.vector.size() != dim) throw DataError("samples of differing dimension");
    data.insert(data.end(), s.vector.begin(), s.vector.end());
  }
  return Matrix<float>(samples.size(), dim, std::move(data));
}

Matrix<float> kmeans_pp_seed(const Matrix<float>& data, std::size_t k, Rng& rng,
                             unsigned threads) {
  const std::size_t n = data.rows();
  const std::size_t dim = data.cols();
  if (k == 0) throw DataError("k-means++ needs K >= 1");
  if (n == 0) throw DataError("k-means++ on empty data");

  Matrix<float> centers(k, dim);
  std::vector<double> d2(n);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t chosen = first(rng);

  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      // Sequential prefix sum keeps the draw independent of the thread count.
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (!(total > 0.0)) {
        throw DataError("K = " + std::to_string(k) + " exceeds the number of distinct points (" +
                        std::to_string(c) + ")");
      }
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double cumulative = 0.0;
      chosen = n;
      std::size_t last_positive = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        last_positive = i;
        cumulative += d2[i];
        if (cumulative > target) {
          chosen = i;
          break;
        }
      }
      if (chosen == n) chosen = last_positive;
    }
    auto row = data.row(chosen);
    std::copy(row.begin(), row.end(), centers.row(c).begin());

    const float* center = centers.row(c).data();
    const bool first_center = c == 0;
    parallel_for(chunk_count(n, kChunk), threads, [&](std::size_t chunk) {
      const std::size_t end = std::min(n, (chunk + 1) * kChunk);
      for (std::size_t i = chunk * kChunk; i < end; ++i) {
        const double d = detail::squared_distance(data.row(i).data(), center, dim);
        d2[i] = first_center ? d : std::min(d2[i], d);
      }
    });
  }
  return centers;
}

namespace {

struct Assignment {
  std::vector<uint32_t> labels;
  std::vector<double> dist2;
  double objective = 0.0;
};

void assign(const Matrix<float>& data, const std::vector<double>& point_norms,
            const Matrix<double>& centroids, unsigned threads, Assignment& out) {
  const std::size_t n = data.rows();
  const std::size_t k = centroids.rows();
  const std::size_t dim = data.cols();
  // Distances are screened in single precision, then every centroid within the
  // screening error bound of the best is re-measured exactly.
  Matrix<float> cf(k, dim);
  std::vector<double> cnorm(k);
  double cmax = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    auto row = centroids.row(c);
    cnorm[c] = std::inner_product(row.begin(), row.end(), row.begin(), 0.0);
    cmax = std::max(cmax, std::sqrt(cnorm[c]));
    std::transform(row.begin(), row.end(), cf.row(c).begin(),
                   [](double v) { return static_cast<float>(v); });
  }
  const double u = std::numeric_limits<float>::epsilon();
  out.labels.resize(n);
  out.dist2.resize(n);
  parallel_for(chunk_count(n, kChunk), threads, [&](std::size_t chunk) {
    std::vector<double> screen(k);
    const std::size_t end = std::min(n, (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      const float* x = data.row(i).data();
      double lowest = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        screen[c] = cnorm[c] - 2.0 * double{detail::dot_screen(x, cf.row(c).data(), dim)};
        lowest = std::min(lowest, screen[c]);
      }
      const double bound =
          4.0 * static_cast<double>(dim + 4) * u * std::sqrt(point_norms[i]) * cmax + 1e-12;
      double best = std::numeric_limits<double>::infinity();
      uint32_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        if (screen[c] > lowest + bound) continue;
        const double d = detail::squared_distance(x, centroids.row(c).data(), dim);
        if (d < best) {
          best = d;
          best_c = static_cast<uint32_t>(c);
        }
      }
      out.labels[i] = best_c;
      out.dist2[i] = best;
    }
  });
  out.objective = std::accumulate(out.dist2.begin(), out.dist2.end(), 0.0);
}

/// Recomputes centroids as member means; returns the indices of empty clusters
/// (whose centroids are left untouched).
std::vector<std::size_t> update_means(const Matrix<float>& data, const Assignment& a,
                                      Matrix<double>& centroids, std::vector<uint32_t>& counts) {
  const std::size_t k = centroids.rows();
  const std::size_t dim = data.cols();
  Matrix<double> sums(k, dim);
  counts.assign(k, 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto dst = sums.row(a.labels[i]);
    auto src = data.row(i);
    for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    ++counts[a.labels[i]];
  }
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      empty.push_back(c);
      continue;
    }
    auto dst = centroids.row(c);
    auto src = sums.row(c);
    const double inv = 1.0 / counts[c];
    for (std::size_t d = 0; d < dim; ++d) dst[d] = src[d] * inv;
  }
  return empty;
}

void reseed_empty(const Matrix<float>& data, const Assignment& a,
                  const std::vector<std::size_t>& empty, Matrix<double>& centroids) {
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(empty.size(), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t x, std::size_t y) {
                      if (a.dist2[x] != a.dist2[y]) return a.dist2[x] > a.dist2[y];
                      return x < y;
                    });
  for (std::size_t e = 0; e < take; ++e) {
    auto src = data.row(order[e]);
    auto dst = centroids.row(empty[e]);
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace

LloydResult lloyd(const Matrix<float>& data, const Matrix<float>& initial_centroids,
                  const LloydOptions& options) {
  if (data.empty()) throw DataError("Lloyd iterations on empty data");
  if (initial_centroids.empty()) throw DataError("Lloyd iterations need at least one centroid");
  if (initial_centroids.cols() != data.cols()) {
    throw DataError("centroid dimension differs from data dimension");
  }
  const std::size_t n = data.rows();
  const std::size_t k = initial_centroids.rows();

  std::vector<double> point_norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    point_norms[i] = detail::dot(data.row(i).data(), data.row(i).data(), data.cols());
  }

  LloydResult result;
  result.centroids = Matrix<double>(k, data.cols());
  {
    auto src = initial_centroids.data();
    auto dst = result.centroids.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }

  Assignment a;
  std::vector<uint32_t> counts;
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    assign(data, point_norms, result.centroids, options.threads, a);
    const double previous = result.history.empty() ? 0.0 : result.history.back();
    result.history.push_back(a.objective);
    ++result.iterations;
    const bool converged =
        iter > 0 && (previous <= 0.0 || (previous - a.objective) < options.rel_tol * previous);

    const auto empty = update_means(data, a, result.centroids, counts);
    if (!empty.empty()) {
      reseed_empty(data, a, empty, result.centroids);
      continue;
    }
    if (converged) break;
  }

  // Final assignment against the last centroids, then the centroids become
  // exactly the means of the returned assignment.
  assign(data, point_norms, result.centroids, options.threads, a);
  result.history.push_back(a.objective);
  update_means(data, a, result.centroids, counts);
  result.assignments = std::move(a.labels);

  double objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    objective += detail::squared_distance(data.row(i).data(),
                                          result.centroids.row(result.assignments[i]).data(),
                                          data.cols());
  }
  result.objective = objective;
  return result;
}

const VisualConcept* ConceptDictionary::find(uint32_t concept_id) const {
  for (const auto& c : concepts) {
    if (c.id == concept_id) return &c;
  }
  return nullptr;
}

ConceptDictionary learn_dictionary(std::span<const FeatureTensor> corpus, const LayerSpec& layer,
                                   const LearnOptions& options) {
  validate(layer);
  if (corpus.empty()) throw DataError("cannot learn a dictionary from an empty corpus");
  const std::size_t k = options.k == 0 ? layer.channels : options.k;

  Rng rng(options.seed);
  const auto samples = sample_responses(corpus, layer, options.samples_per_image, rng);
  const auto data = to_matrix(samples);
  if (data.rows() < k) {
    throw DataError("K = " + std::to_string(k) + " exceeds the number of samples (" +
                    std::to_string(data.rows()) + ")");
  }
  const auto seeds = kmeans_pp_seed(data, k, rng, options.lloyd.threads);
  const auto fit = lloyd(data, seeds, options.lloyd);

  std::vector<uint32_t> counts(k, 0);
  for (auto label : fit.assignments) ++counts[label];

  ConceptDictionary dict;
  dict.object_class = options.object_class;
  dict.layer = layer;
  dict.provenance = {static_cast<uint32_t>(k), options.seed, -1.0, data.rows()};
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    VisualConcept vc;
    vc.id = static_cast<uint32_t>(c);
    vc.member_count = counts[c];
    auto row = fit.centroids.row(c);
    vc.centroid.assign(row.begin(), row.end());
    dict.concepts.push_back(std::move(vc));
  }
  return dict;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  const double ab = detail::dot(a.data(), b.data(), a.size());
  const double aa = detail::dot(a.data(), a.data(), a.size());
  const double bb = detail::dot(b.data(), b.data(), b.size());
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

ConceptDictionary merge_dictionary(const ConceptDictionary& dict, double sim_threshold) {
  ConceptDictionary out = dict;
  out.provenance.merge_threshold = sim_threshold;
  auto& concepts = out.concepts;
  const std::size_t n = concepts.size();
  if (n < 2) return out;

  std::vector<bool> alive(n, true);
  std::vector<double> sim(n * n, 0.0);
  auto refresh = [&](std::size_t a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a || !alive[b]) continue;
      const double s = cosine_similarity(concepts[a].centroid, concepts[b].centroid);
      sim[a * n + b] = s;
      sim[b * n + a] = s;
    }
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = cosine_similarity(concepts[a].centroid, concepts[b].centroid);
      sim[a * n + b] = s;
      sim[b * n + a] = s;
    }
  }

  for (;;) {
    // Best pair: highest similarity, then lowest (id_a, id_b).
    std::size_t best_a = n, best_b = n;
    double best = -std::numeric_limits<double>::infinity();
    auto key = [&](std::size_t a, std::size_t b) {
      const auto lo = std::min(concepts[a].id, concepts[b].id);
      const auto hi = std::max(concepts[a].id, concepts[b].id);
      return std::pair(lo, hi);
    };
    for (std::size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!alive[b]) continue;
        const double s = sim[a * n + b];
        if (s > best || (s == best && best_a != n && key(a, b) < key(best_a, best_b))) {
          best = s;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a == n || best < sim_threshold) break;

    // Keep the lower id.
    std::size_t keep = best_a, drop = best_b;
    if (concepts[drop].id < concepts[keep].id) std::swap(keep, drop);
    auto& kc = concepts[keep];
    const auto& dc = concepts[drop];
    double wk = kc.member_count, wd = dc.member_count;
    if (wk + wd == 0.0) wk = wd = 1.0;
    for (std::size_t d = 0; d < kc.centroid.size(); ++d) {
      kc.centroid[d] = static_cast<float>((wk * kc.centroid[d] + wd * dc.centroid[d]) / (wk + wd));
    }
    kc.member_count += dc.member_count;
    alive[drop] = false;
    refresh(keep);
  }

  std::vector<VisualConcept> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) kept.push_back(std::move(concepts[i]));
  }
  concepts = std::move(kept);
  return out;
}

}  // namespace conceptforge
