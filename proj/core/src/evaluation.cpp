#include "conceptforge/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "conceptforge/error.hpp"
#include "conceptforge/parallel.hpp"

namespace conceptforge {

std::string_view to_string(ApMode mode) {
  return mode == ApMode::continuous ? "continuous" : "voc11";
}

ApMode parse_ap_mode(std::string_view text) {
  if (text == "continuous") return ApMode::continuous;
  if (text == "voc11") return ApMode::voc11;
  throw DataError("unknown AP mode '" + std::string(text) + "' (continuous or voc11)");
}

std::size_t MatchResult::true_positives() const {
  return static_cast<std::size_t>(std::count(is_tp.begin(), is_tp.end(), uint8_t{1}));
}

MatchResult match_detections(std::span<const Detection> ranked,
                             std::span<const GroundTruthInstance> targets, double radius_px) {
  std::unordered_map<std::string_view, std::vector<uint32_t>> by_image;
  for (uint32_t g = 0; g < targets.size(); ++g) by_image[targets[g].image_id].push_back(g);

  MatchResult result;
  result.n_gt = targets.size();
  result.match_radius = radius_px;
  result.is_tp.assign(ranked.size(), 0);
  result.matched_gt.assign(ranked.size(), -1);
  std::vector<uint8_t> taken(targets.size(), 0);
  const double r2 = radius_px * radius_px;
  for (std::size_t d = 0; d < ranked.size(); ++d) {
    auto it = by_image.find(ranked[d].image_id);
    if (it == by_image.end()) continue;
    int64_t best = -1;
    double best_d2 = 0.0;
    for (uint32_t g : it->second) {
      if (taken[g]) continue;
      const double d2 = squared_distance(ranked[d].center, targets[g].center);
      if (d2 > r2) continue;
      if (best < 0 || d2 < best_d2) {
        best = g;
        best_d2 = d2;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = 1;
      result.is_tp[d] = 1;
      result.matched_gt[d] = best;
    }
  }
  return result;
}

namespace {

std::optional<double> voc11_ap(const std::vector<double>& recall,
                               const std::vector<double>& precision) {
  double sum = 0.0;
  for (int t = 0; t <= 10; ++t) {
    const double threshold = t / 10.0;
    double best = 0.0;
    for (std::size_t k = 0; k < recall.size(); ++k) {
      if (recall[k] >= threshold - 1e-12) best = std::max(best, precision[k]);
    }
    sum += best;
  }
  return sum / 11.0;
}

}  // namespace

PRCurve pr_curve(const MatchResult& match, ApMode mode) {
  PRCurve curve;
  const std::size_t n = match.is_tp.size();
  curve.recall.reserve(n);
  curve.precision.reserve(n);
  std::size_t tp = 0;
  double area = 0.0;
  double previous_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += match.is_tp[k];
    const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    const double recall =
        match.n_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(match.n_gt);
    area += precision * (recall - previous_recall);
    previous_recall = recall;
    curve.recall.push_back(recall);
    curve.precision.push_back(precision);
  }
  if (match.n_gt == 0) return curve;
  curve.ap = mode == ApMode::continuous ? std::optional<double>(area)
                                        : voc11_ap(curve.recall, curve.precision);
  return curve;
}

std::optional<double> average_precision(const MatchResult& match, ApMode mode) {
  return pr_curve(match, mode).ap;
}

std::optional<double> average_precision(std::span<const uint8_t> is_tp, std::size_t n_gt,
                                        ApMode mode) {
  MatchResult m;
  m.is_tp.assign(is_tp.begin(), is_tp.end());
  m.n_gt = n_gt;
  return average_precision(m, mode);
}

GroundTruthSet::GroundTruthSet(std::vector<GroundTruthInstance> instances)
    : GroundTruthSet(instances, part_ids(instances)) {}

GroundTruthSet::GroundTruthSet(std::vector<GroundTruthInstance> instances,
                               std::vector<std::string> parts)
    : instances_(std::move(instances)), parts_(std::move(parts)) {
  if (!std::is_sorted(parts_.begin(), parts_.end())) {
    throw DataError("ground-truth part list must be sorted");
  }
  part_counts_.assign(parts_.size(), 0);
  part_index_.reserve(instances_.size());
  for (uint32_t g = 0; g < instances_.size(); ++g) {
    auto idx = find_part(instances_[g].part_id);
    if (!idx) throw DataError("part '" + instances_[g].part_id + "' missing from part list");
    part_index_.push_back(*idx);
    ++part_counts_[*idx];
    by_image_[instances_[g].image_id].push_back(g);
  }
}

std::optional<uint32_t> GroundTruthSet::find_part(std::string_view part_id) const {
  auto it = std::lower_bound(parts_.begin(), parts_.end(), part_id);
  if (it == parts_.end() || *it != part_id) return std::nullopt;
  return static_cast<uint32_t>(it - parts_.begin());
}

std::span<const uint32_t> GroundTruthSet::in_image(const std::string& image_id) const {
  auto it = by_image_.find(image_id);
  if (it == by_image_.end()) return {};
  return it->second;
}

ConceptMatcher::ConceptMatcher(std::span<const Detection> ranked, const GroundTruthSet& gts,
                               double radius_px)
    : gts_(&gts), radius_(radius_px), n_detections_(ranked.size()),
      near_by_part_(gts.part_count()) {
  const double r2 = radius_px * radius_px;
  offsets_.reserve(ranked.size() + 1);
  offsets_.push_back(0);
  std::vector<std::pair<double, uint32_t>> near;
  for (const auto& det : ranked) {
    near.clear();
    for (uint32_t g : gts.in_image(det.image_id)) {
      const double d2 = squared_distance(det.center, gts.instances()[g].center);
      if (d2 <= r2) near.emplace_back(d2, g);
    }
    std::sort(near.begin(), near.end());
    const auto d = static_cast<uint32_t>(offsets_.size() - 1);
    for (const auto& [d2, g] : near) {
      const uint32_t part = gts.part_index_of(g);
      candidates_.push_back({g, part});
      auto& list = near_by_part_[part];
      if (list.empty() || list.back() != d) list.push_back(d);
    }
    offsets_.push_back(candidates_.size());
  }
}

MatchResult ConceptMatcher::match(std::span<const uint32_t> parts) const {
  std::vector<uint8_t> wanted(gts_->part_count(), 0);
  MatchResult result;
  result.match_radius = radius_;
  for (uint32_t p : parts) {
    if (!wanted[p]) result.n_gt += gts_->count(p);
    wanted[p] = 1;
  }
  result.is_tp.assign(n_detections_, 0);
  result.matched_gt.assign(n_detections_, -1);
  std::vector<uint8_t> taken(gts_->instances().size(), 0);
  for (std::size_t d = 0; d < n_detections_; ++d) {
    for (std::size_t c = offsets_[d]; c < offsets_[d + 1]; ++c) {
      const auto& cand = candidates_[c];
      if (!wanted[cand.part] || taken[cand.gt]) continue;
      taken[cand.gt] = 1;
      result.is_tp[d] = 1;
      result.matched_gt[d] = cand.gt;
      break;
    }
  }
  return result;
}

std::optional<double> ConceptMatcher::ap(std::span<const uint32_t> parts, ApMode mode) const {
  if (mode != ApMode::continuous) return average_precision(match(parts), mode);

  // Same accumulation as pr_curve, visiting only detections that can match:
  // a false positive adds precision * 0 to the area. Buffers are reused across
  // calls because the subset search calls this thousands of times per concept.
  thread_local std::vector<uint8_t> wanted;
  thread_local std::vector<uint8_t> taken;
  thread_local std::vector<uint32_t> merged;
  thread_local std::vector<uint32_t> spare;
  wanted.assign(gts_->part_count(), 0);
  std::size_t n_gt = 0;
  for (uint32_t p : parts) {
    if (!wanted[p]) n_gt += gts_->count(p);
    wanted[p] = 1;
  }
  if (n_gt == 0) return std::nullopt;
  std::span<const uint32_t> visit;
  if (parts.size() == 1) {
    visit = near_by_part_[parts[0]];
  } else {
    merged.clear();
    for (uint32_t p : parts) {
      const auto& list = near_by_part_[p];
      spare.resize(merged.size() + list.size());
      const auto end = std::set_union(merged.begin(), merged.end(), list.begin(), list.end(),
                                      spare.begin());
      spare.erase(end, spare.end());
      std::swap(merged, spare);
    }
    visit = merged;
  }
  taken.assign(gts_->instances().size(), 0);
  std::size_t tp = 0;
  double area = 0.0;
  double previous_recall = 0.0;
  for (uint32_t d : visit) {
    for (std::size_t c = offsets_[d]; c < offsets_[d + 1]; ++c) {
      const auto& cand = candidates_[c];
      if (!wanted[cand.part] || taken[cand.gt]) continue;
      taken[cand.gt] = 1;
      ++tp;
      const double precision = static_cast<double>(tp) / static_cast<double>(d + 1);
      const double recall = static_cast<double>(tp) / static_cast<double>(n_gt);
      area += precision * (recall - previous_recall);
      previous_recall = recall;
      break;
    }
  }
  return area;
}

ApMatrix compute_ap_matrix(std::span<const std::vector<Detection>> detections,
                           std::span<const uint32_t> concept_ids, const GroundTruthSet& gts,
                           const EvalOptions& options) {
  if (detections.size() != concept_ids.size()) {
    throw DataError("one detection list per concept id required");
  }
  ApMatrix m;
  m.concept_ids.assign(concept_ids.begin(), concept_ids.end());
  m.parts.assign(gts.parts().begin(), gts.parts().end());
  const std::size_t n_parts = m.parts.size();
  m.values.resize(concept_ids.size() * n_parts);
  parallel_for(concept_ids.size(), options.threads, [&](std::size_t k) {
    ConceptMatcher matcher(detections[k], gts, options.match_radius);
    for (uint32_t p = 0; p < n_parts; ++p) {
      const uint32_t one[] = {p};
      m.values[k * n_parts + p] = matcher.ap(one, options.mode);
    }
  });
  return m;
}

BestConceptTable best_concept_per_part(const ApMatrix& matrix) {
  BestConceptTable table;
  for (std::size_t p = 0; p < matrix.parts.size(); ++p) {
    BestConceptRow row;
    row.part = matrix.parts[p];
    for (std::size_t k = 0; k < matrix.concept_ids.size(); ++k) {
      const auto ap = matrix.at(k, p);
      if (ap && (!row.ap || *ap > *row.ap)) {
        row.ap = ap;
        row.concept_id = matrix.concept_ids[k];
      }
    }
    table.rows.push_back(std::move(row));
  }
  table.mean_ap = mean_defined_ap(table.rows);
  return table;
}

SubsetResult best_subset_per_concept(const ConceptMatcher& matcher, std::size_t n_parts,
                                     std::size_t max_subset, ApMode mode) {
  if (max_subset == 0) throw DataError("subset size limit must be at least 1");
  SubsetResult best;
  const std::size_t limit = std::min(max_subset, n_parts);
  std::vector<uint32_t> combo;
  for (std::size_t size = 1; size <= limit; ++size) {
    combo.resize(size);
    std::iota(combo.begin(), combo.end(), 0u);
    for (;;) {
      const auto ap = matcher.ap(combo, mode);
      if (ap) {
        if (!best.ap || *ap > *best.ap) {
          best.ap = ap;
          best.parts = combo;
        }
        if (size == 1 && (!best.best_single_ap || *ap > *best.best_single_ap)) {
          best.best_single_ap = ap;
        }
      }
      // Next combination in lexicographic order.
      std::size_t i = size;
      while (i > 0 && combo[i - 1] == n_parts - size + i - 1) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < size; ++j) combo[j] = combo[j - 1] + 1;
    }
  }
  return best;
}

std::size_t histogram_bin(double ap) {
  const auto bin = static_cast<std::size_t>(std::max(0.0, ap) * kHistogramBins);
  return std::min(bin, kHistogramBins - 1);
}

ApHistograms ap_histograms(std::span<const SubsetResult> subsets) {
  ApHistograms h;
  for (const auto& s : subsets) {
    if (s.best_single_ap) ++h.single_sp[histogram_bin(*s.best_single_ap)];
    if (s.ap) {
      ++h.multiple_sp[histogram_bin(*s.ap)];
      ++h.subset_sizes[s.parts.size()];
    }
  }
  return h;
}

std::optional<double> mean_defined_ap(std::span<const BestConceptRow> rows) {
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& row : rows) {
    if (row.ap) {
      sum += *row.ap;
      ++defined;
    }
  }
  if (defined == 0) return std::nullopt;
  return sum / static_cast<double>(defined);
}

void summarize_best_bins(ViewpointReport& report) {
  report.best_bin_rows.clear();
  report.best_bin_mean_ap.reset();
  if (report.per_bin.empty()) return;
  const auto& first = report.per_bin.front().second.rows;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t p = 0; p < first.size(); ++p) {
    ViewpointPartRow row;
    row.part = first[p].part;
    for (const auto& [bin, table] : report.per_bin) {
      const auto& r = table.rows[p];
      if (r.ap && (!row.best_ap || *r.ap > *row.best_ap)) {
        row.best_ap = r.ap;
        row.best_bin = bin;
        row.concept_id = r.concept_id;
      }
    }
    if (row.best_ap) {
      sum += *row.best_ap;
      ++defined;
    }
    report.best_bin_rows.push_back(std::move(row));
  }
  if (defined > 0) report.best_bin_mean_ap = sum / static_cast<double>(defined);
}

namespace {

Viewpoint image_viewpoint(const std::string& image_id, Viewpoint fallback,
                          const std::unordered_map<std::string, Viewpoint>& image_viewpoints) {
  auto it = image_viewpoints.find(image_id);
  return it == image_viewpoints.end() ? fallback : it->second;
}

}  // namespace

ViewpointReport viewpoint_controlled_eval(
    std::span<const std::vector<Detection>> detections, std::span<const uint32_t> concept_ids,
    std::span<const GroundTruthInstance> gts,
    const std::unordered_map<std::string, Viewpoint>& image_viewpoints,
    const EvalOptions& options) {
  ViewpointReport report;
  const auto parts = part_ids(gts);
  for (const auto& [id, bin] : image_viewpoints) {
    if (bin == Viewpoint::unknown) ++report.excluded_images;
  }

  for (Viewpoint bin : kViewpointBins) {
    std::vector<GroundTruthInstance> bin_gts;
    for (const auto& gt : gts) {
      if (image_viewpoint(gt.image_id, gt.viewpoint, image_viewpoints) == bin) bin_gts.push_back(gt);
    }
    std::vector<std::vector<Detection>> bin_dets(detections.size());
    for (std::size_t k = 0; k < detections.size(); ++k) {
      for (const auto& d : detections[k]) {
        if (image_viewpoint(d.image_id, Viewpoint::unknown, image_viewpoints) == bin) {
          bin_dets[k].push_back(d);
        }
      }
    }
    GroundTruthSet set(std::move(bin_gts), parts);
    report.per_bin.emplace_back(
        bin, best_concept_per_part(compute_ap_matrix(bin_dets, concept_ids, set, options)));
  }

  summarize_best_bins(report);
  return report;
}

EvalReport evaluate(std::span<const std::vector<Detection>> detections,
                    std::span<const uint32_t> concept_ids,
                    std::span<const GroundTruthInstance> gts,
                    const std::unordered_map<std::string, Viewpoint>& image_viewpoints,
                    const EvalOptions& options) {
  if (detections.size() != concept_ids.size()) {
    throw DataError("one detection list per concept id required");
  }
  EvalReport report;
  report.options = options;
  const GroundTruthSet set(std::vector<GroundTruthInstance>(gts.begin(), gts.end()));
  const std::size_t n_parts = set.part_count();

  report.matrix.concept_ids.assign(concept_ids.begin(), concept_ids.end());
  report.matrix.parts.assign(set.parts().begin(), set.parts().end());
  report.matrix.values.resize(concept_ids.size() * n_parts);
  report.subsets.resize(concept_ids.size());
  parallel_for(concept_ids.size(), options.threads, [&](std::size_t k) {
    ConceptMatcher matcher(detections[k], set, options.match_radius);
    for (uint32_t p = 0; p < n_parts; ++p) {
      const uint32_t one[] = {p};
      report.matrix.values[k * n_parts + p] = matcher.ap(one, options.mode);
    }
    if (n_parts > 0) {
      report.subsets[k] =
          best_subset_per_concept(matcher, n_parts, options.subset_max, options.mode);
    }
    report.subsets[k].concept_id = concept_ids[k];
  });

  report.best_concepts = best_concept_per_part(report.matrix);
  for (std::size_t p = 0; p < n_parts; ++p) {
    const auto& row = report.best_concepts.rows[p];
    if (!row.concept_id) {
      report.best_concept_curves.emplace_back();
      continue;
    }
    const auto k = static_cast<std::size_t>(
        std::find(concept_ids.begin(), concept_ids.end(), *row.concept_id) - concept_ids.begin());
    ConceptMatcher matcher(detections[k], set, options.match_radius);
    const uint32_t one[] = {static_cast<uint32_t>(p)};
    report.best_concept_curves.push_back(pr_curve(matcher.match(one), options.mode));
  }
  report.histograms = ap_histograms(report.subsets);
  if (!image_viewpoints.empty()) {
    report.viewpoint =
        viewpoint_controlled_eval(detections, concept_ids, gts, image_viewpoints, options);
  }
  return report;
}

std::pair<std::vector<uint32_t>, std::vector<std::vector<Detection>>> group_by_concept(
    std::span<const Detection> detections) {
  std::map<uint32_t, std::vector<Detection>> groups;
  for (const auto& d : detections) groups[d.concept_id].push_back(d);
  std::pair<std::vector<uint32_t>, std::vector<std::vector<Detection>>> out;
  for (auto& [id, dets] : groups) {
    out.first.push_back(id);
    out.second.push_back(std::move(dets));
  }
  return out;
}

}  // namespace conceptforge
