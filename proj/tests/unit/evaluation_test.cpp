#include <gtest/gtest.h>

#include <random>

#include "conceptforge/detector.hpp"
#include "conceptforge/evaluation.hpp"
#include "oracles.hpp"

using namespace conceptforge;

namespace {

Detection det(const std::string& image, double x, double y, float score, uint32_t concept_id = 0) {
  Detection d;
  d.image_id = image;
  d.concept_id = concept_id;
  d.center = {x, y};
  d.score = score;
  return d;
}

GroundTruthInstance gt(const std::string& image, const std::string& part, double x, double y,
                       Viewpoint vp = Viewpoint::unknown) {
  GroundTruthInstance g;
  g.image_id = image;
  g.part_id = part;
  g.center = {x, y};
  g.viewpoint = vp;
  return g;
}

std::vector<int> as_ints(const MatchResult& m) {
  return {m.matched_gt.begin(), m.matched_gt.end()};
}

/// Concept `k` fires on each image at the ground truth of `parts`, then adds
/// one false positive per image far from everything.
std::vector<Detection> firing_on(const std::vector<GroundTruthInstance>& gts,
                                 const std::vector<std::string>& parts, uint32_t k, float top) {
  std::vector<Detection> out;
  float score = top;
  for (const auto& g : gts) {
    if (std::find(parts.begin(), parts.end(), g.part_id) == parts.end()) continue;
    out.push_back(det(g.image_id, g.center.x, g.center.y, score, k));
    score -= 0.001f;
  }
  for (const auto& g : gts) {
    out.push_back(det(g.image_id, 1000, 1000, score, k));
    score -= 0.001f;
  }
  sort_by_rank(out);
  return out;
}

/// Images i0..i(n-1), each with one instance of every part at a distinct spot.
std::vector<GroundTruthInstance> grid_ground_truth(int n_images, const std::vector<std::string>& parts) {
  std::vector<GroundTruthInstance> out;
  for (int i = 0; i < n_images; ++i) {
    for (std::size_t p = 0; p < parts.size(); ++p) {
      out.push_back(gt("i" + std::to_string(i), parts[p], 20.0 + 150.0 * (p % 4), 20.0 + 150.0 * (p / 4)));
    }
  }
  return out;
}

}  // namespace

TEST(Matching, Examples) {
  const std::vector<GroundTruthInstance> one = {gt("a", "p", 100, 100)};
  const std::vector<Detection> near = {det("a", 110, 100, 0.9f)};
  auto m = match_detections(near, one);
  EXPECT_EQ(m.is_tp, (std::vector<uint8_t>{1}));
  EXPECT_EQ(m.n_gt, 1u);

  const std::vector<Detection> two = {det("a", 110, 100, 0.9f), det("a", 100, 105, 0.5f)};
  m = match_detections(two, one);
  EXPECT_EQ(m.is_tp, (std::vector<uint8_t>{1, 0}));
  EXPECT_EQ(m.true_positives(), 1u);
}

TEST(Matching, RadiusIsInclusiveAndImagesSeparate) {
  const std::vector<GroundTruthInstance> one = {gt("a", "p", 0, 0)};
  EXPECT_EQ(match_detections(std::vector{det("a", 56, 0, 1)}, one).is_tp[0], 1);
  EXPECT_EQ(match_detections(std::vector{det("a", 56.01, 0, 1)}, one).is_tp[0], 0);
  EXPECT_EQ(match_detections(std::vector{det("b", 0, 0, 1)}, one).is_tp[0], 0);
}

TEST(Matching, NearestThenLowestIndex) {
  const std::vector<GroundTruthInstance> gts = {gt("a", "p", 20, 0), gt("a", "p", 10, 0),
                                                gt("a", "p", -10, 0)};
  const auto m = match_detections(std::vector{det("a", 0, 0, 1), det("a", 0, 0, 0.5f)}, gts);
  EXPECT_EQ(as_ints(m), (std::vector<int>{1, 2}));
}

TEST(Matching, AgreesWithOracles) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 300; ++t) {
    const std::size_t nd = rng() % 21;
    const std::size_t ng = rng() % 11;
    auto dets = oracle::random_detections(rng, nd, 2, 150.0);
    sort_by_rank(dets);
    const auto gts = oracle::random_ground_truth(rng, ng, 2, 150.0, "p");
    const auto got = as_ints(match_detections(dets, gts, 40.0));
    EXPECT_EQ(got, oracle::score_order_match(dets, gts, 40.0)) << "instance " << t;
    EXPECT_EQ(got, oracle::exhaustive_match(dets, gts, 40.0)) << t;
  }
}

TEST(Matching, Invariants) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 100; ++t) {
    auto dets = oracle::random_detections(rng, 60, 3, 200.0);
    sort_by_rank(dets);
    const auto gts = oracle::random_ground_truth(rng, 25, 3, 200.0, "p");
    const auto m = match_detections(dets, gts);
    ASSERT_EQ(m.is_tp.size(), dets.size());
    EXPECT_LE(m.true_positives(), m.n_gt);
    std::vector<int> seen(gts.size(), 0);
    for (std::size_t d = 0; d < dets.size(); ++d) {
      EXPECT_EQ(m.is_tp[d] != 0, m.matched_gt[d] >= 0);
      if (m.matched_gt[d] >= 0) ++seen[static_cast<std::size_t>(m.matched_gt[d])];
    }
    for (int s : seen) EXPECT_LE(s, 1);
  }
}

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision(std::vector<uint8_t>{1}, 1), 1.0);
  EXPECT_EQ(average_precision(std::vector<uint8_t>{0, 1}, 1), 0.5);
  EXPECT_DOUBLE_EQ(*average_precision(std::vector<uint8_t>{1, 0, 1}, 2), (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_FALSE(average_precision(std::vector<uint8_t>{0, 0}, 0).has_value());
  EXPECT_FALSE(average_precision(std::vector<uint8_t>{}, 0, ApMode::voc11).has_value());
  EXPECT_EQ(average_precision(std::vector<uint8_t>{}, 3), 0.0);
}

TEST(AveragePrecision, AgreesWithOracle) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = rng() % 21;
    std::vector<uint8_t> flags(n);
    std::size_t tps = 0;
    for (auto& f : flags) tps += (f = static_cast<uint8_t>(rng() % 2));
    const std::size_t n_gt = tps + rng() % 4;
    const auto got = average_precision(flags, n_gt);
    const auto want = oracle::ap(flags, n_gt);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) EXPECT_NEAR(*got, *want, 1e-12);
  }
}

TEST(AveragePrecision, FalsePositiveMonotonicity) {
  std::mt19937_64 rng(24);
  for (int t = 0; t < 300; ++t) {
    std::vector<uint8_t> flags(1 + rng() % 30);
    std::size_t tps = 0;
    for (auto& f : flags) tps += (f = static_cast<uint8_t>(rng() % 2));
    const std::size_t n_gt = std::max<std::size_t>(1, tps + rng() % 3);
    const double base = *average_precision(flags, n_gt);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 1.0);
    auto appended = flags;
    appended.push_back(0);
    EXPECT_LE(*average_precision(appended, n_gt), base);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (flags[i]) continue;
      auto removed = flags;
      removed.erase(removed.begin() + static_cast<std::ptrdiff_t>(i));
      EXPECT_GE(*average_precision(removed, n_gt), base);
    }
  }
}

TEST(AveragePrecision, OneExactlyWhenPerfect) {
  EXPECT_EQ(average_precision(std::vector<uint8_t>{1, 1, 1, 0, 0}, 3), 1.0);
  EXPECT_LT(*average_precision(std::vector<uint8_t>{1, 1, 1}, 4), 1.0);
  EXPECT_LT(*average_precision(std::vector<uint8_t>{1, 0, 1}, 2), 1.0);
}

TEST(AveragePrecision, PrCurveShape) {
  MatchResult m;
  m.is_tp = {1, 0, 1, 1, 0};
  m.matched_gt = {0, -1, 1, 2, -1};
  m.n_gt = 4;
  const auto c = pr_curve(m);
  ASSERT_EQ(c.recall.size(), 5u);
  for (std::size_t i = 1; i < c.recall.size(); ++i) EXPECT_GE(c.recall[i], c.recall[i - 1]);
  for (double p : c.precision) EXPECT_TRUE(p >= 0 && p <= 1);
  EXPECT_EQ(c.ap, average_precision(m));
}

TEST(AveragePrecision, Voc11) {
  // Precision 1 up to recall 0.5, nothing after.
  EXPECT_NEAR(*average_precision(std::vector<uint8_t>{1}, 2, ApMode::voc11), 6.0 / 11.0, 1e-12);
  EXPECT_EQ(average_precision(std::vector<uint8_t>{1, 1}, 2, ApMode::voc11), 1.0);
  EXPECT_EQ(parse_ap_mode("voc11"), ApMode::voc11);
  EXPECT_EQ(to_string(ApMode::continuous), "continuous");
}

TEST(ConceptMatcher, FastApEqualsFullCurve) {
  std::mt19937_64 rng(25);
  for (int t = 0; t < 100; ++t) {
    auto dets = oracle::random_detections(rng, 80, 4, 200.0, t % 2 == 0);
    sort_by_rank(dets);
    std::vector<GroundTruthInstance> all;
    for (const char* part : {"a", "b", "c", "d"}) {
      auto some = oracle::random_ground_truth(rng, rng() % 12, 4, 200.0, part);
      all.insert(all.end(), some.begin(), some.end());
    }
    const GroundTruthSet set(all);
    const ConceptMatcher matcher(dets, set, 40.0);
    const std::vector<std::vector<uint32_t>> subsets = {{0}, {1}, {2}, {3}, {0, 2}, {1, 3}, {0, 1, 2}, {0, 1, 2, 3}};
    for (const auto& s : subsets) {
      if (std::any_of(s.begin(), s.end(), [&](uint32_t p) { return p >= set.part_count(); })) continue;
      const auto fast = matcher.ap(s, ApMode::continuous);
      const auto full = pr_curve(matcher.match(s)).ap;
      ASSERT_EQ(fast.has_value(), full.has_value());
      if (fast) EXPECT_EQ(*fast, *full);

      std::vector<GroundTruthInstance> targets;
      for (const auto& g : all) {
        if (std::any_of(s.begin(), s.end(), [&](uint32_t p) { return set.parts()[p] == g.part_id; })) {
          targets.push_back(g);
        }
      }
      EXPECT_EQ(matcher.match(s).is_tp, match_detections(dets, targets, 40.0).is_tp);
    }
  }
}

TEST(BestConcept, PicksHighestApPerPart) {
  const auto gts = grid_ground_truth(5, {"a", "b"});
  const std::vector<std::vector<Detection>> dets = {firing_on(gts, {"b"}, 7, 1.0f),
                                                    firing_on(gts, {"a"}, 3, 1.0f)};
  const std::vector<uint32_t> ids = {7, 3};
  const GroundTruthSet set(gts);
  const auto table = best_concept_per_part(compute_ap_matrix(dets, ids, set, {}));
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].part, "a");
  EXPECT_EQ(table.rows[0].concept_id, 3u);
  EXPECT_EQ(table.rows[0].ap, 1.0);
  EXPECT_EQ(table.rows[1].concept_id, 7u);
  EXPECT_EQ(table.mean_ap, 1.0);
}

TEST(BestConcept, SinglePartSingleConcept) {
  const auto gts = grid_ground_truth(3, {"only"});
  const std::vector<std::vector<Detection>> dets = {firing_on(gts, {"only"}, 0, 1.0f)};
  const std::vector<uint32_t> ids = {0};
  const auto table = best_concept_per_part(compute_ap_matrix(dets, ids, GroundTruthSet(gts), {}));
  EXPECT_EQ(table.rows.size(), 1u);
}

TEST(BestConcept, AbsentPartsStayAbsent) {
  ApMatrix m;
  m.concept_ids = {0, 1};
  m.parts = {"a", "b"};
  m.values = {0.5, std::nullopt, 0.5, std::nullopt};
  const auto table = best_concept_per_part(m);
  EXPECT_EQ(table.rows[0].concept_id, 0u);  // tie goes to the first concept
  EXPECT_FALSE(table.rows[1].ap.has_value());
  EXPECT_EQ(table.mean_ap, 0.5);
}

TEST(Subsets, TwoPartConceptSelectsBothParts) {
  const auto gts = grid_ground_truth(6, {"a", "b", "c"});
  const auto dets = firing_on(gts, {"a", "b"}, 0, 1.0f);
  const GroundTruthSet set(gts);
  const ConceptMatcher matcher(dets, set, 56.0);
  const auto best = best_subset_per_concept(matcher, set.part_count(), 4);
  EXPECT_EQ(best.parts, (std::vector<uint32_t>{0, 1}));
  EXPECT_EQ(best.ap, 1.0);
  ASSERT_TRUE(best.best_single_ap.has_value());
  EXPECT_LT(*best.best_single_ap, *best.ap);

  const auto single = best_subset_per_concept(matcher, set.part_count(), 1);
  EXPECT_EQ(single.parts.size(), 1u);
  EXPECT_EQ(single.ap, best.best_single_ap);
}

TEST(Subsets, ReductionAndDominanceOnRandomData) {
  std::mt19937_64 rng(26);
  for (int t = 0; t < 40; ++t) {
    auto dets = oracle::random_detections(rng, 60, 3, 200.0);
    sort_by_rank(dets);
    std::vector<GroundTruthInstance> all;
    for (const char* part : {"a", "b", "c", "d", "e"}) {
      auto some = oracle::random_ground_truth(rng, 1 + rng() % 8, 3, 200.0, part);
      all.insert(all.end(), some.begin(), some.end());
    }
    const GroundTruthSet set(all);
    const ConceptMatcher matcher(dets, set, 40.0);
    const auto one = best_subset_per_concept(matcher, set.part_count(), 1);
    double best_single = -1;
    uint32_t best_part = 0;
    for (uint32_t p = 0; p < set.part_count(); ++p) {
      const uint32_t s[] = {p};
      const double ap = *matcher.ap(s, ApMode::continuous);
      if (ap > best_single) best_single = ap, best_part = p;
    }
    EXPECT_EQ(one.ap, best_single);
    EXPECT_EQ(one.parts, (std::vector<uint32_t>{best_part}));
    const auto four = best_subset_per_concept(matcher, set.part_count(), 4);
    EXPECT_GE(*four.ap, *one.ap);
    EXPECT_EQ(four.best_single_ap, one.ap);
    EXPECT_LE(four.parts.size(), 4u);
  }
}

TEST(Histograms, BinsAndDistribution) {
  EXPECT_EQ(histogram_bin(0.0), 0u);
  EXPECT_EQ(histogram_bin(0.15), 1u);
  EXPECT_EQ(histogram_bin(1.0), 9u);

  std::vector<SubsetResult> perfect(3);
  for (auto& s : perfect) s.parts = {0}, s.ap = 1.0, s.best_single_ap = 1.0;
  const auto h = ap_histograms(perfect);
  EXPECT_EQ(h.single_sp[9], 3u);
  EXPECT_EQ(h.subset_sizes.at(1), 3u);
  EXPECT_EQ(h.subset_sizes.size(), 1u);
}

TEST(Histograms, TwoPartConceptsPeakAtTwo) {
  const std::vector<std::string> parts = {"p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7"};
  const auto gts = grid_ground_truth(6, parts);
  std::vector<std::vector<Detection>> dets;
  std::vector<uint32_t> ids;
  for (uint32_t k = 0; k < 4; ++k) {
    dets.push_back(firing_on(gts, {parts[2 * k], parts[2 * k + 1]}, k, 1.0f));
    ids.push_back(k);
  }
  const auto report = evaluate(dets, ids, gts, {}, {});
  const auto& sizes = report.histograms.subset_sizes;
  std::size_t mode = 0, count = 0;
  for (const auto& [size, n] : sizes) {
    if (n > count) mode = size, count = n;
  }
  EXPECT_EQ(mode, 2u);
  // MultipleSP dominates SingleSP bin-cumulatively from the top.
  std::size_t single = 0, multiple = 0;
  for (std::size_t b = kHistogramBins; b-- > 0;) {
    single += report.histograms.single_sp[b];
    multiple += report.histograms.multiple_sp[b];
    EXPECT_GE(multiple, single);
  }
}

TEST(Viewpoint, OneBinEqualsUnrestricted) {
  const auto gts = grid_ground_truth(5, {"a", "b"});
  std::mt19937_64 rng(27);
  std::vector<std::vector<Detection>> dets(2);
  for (uint32_t k = 0; k < 2; ++k) {
    auto d = oracle::random_detections(rng, 40, 5, 300.0, false);
    for (auto& x : d) x.image_id = "i" + x.image_id.substr(2), x.concept_id = k;
    sort_by_rank(d);
    dets[k] = d;
  }
  const std::vector<uint32_t> ids = {0, 1};
  std::unordered_map<std::string, Viewpoint> vps;
  for (int i = 0; i < 5; ++i) vps["i" + std::to_string(i)] = Viewpoint::side;
  const auto report = evaluate(dets, ids, gts, vps, {});
  ASSERT_TRUE(report.viewpoint.has_value());
  for (const auto& [bin, table] : report.viewpoint->per_bin) {
    if (bin != Viewpoint::side) continue;
    for (std::size_t p = 0; p < table.rows.size(); ++p) {
      EXPECT_EQ(table.rows[p].ap, report.best_concepts.rows[p].ap);
    }
  }
  EXPECT_EQ(report.viewpoint->excluded_images, 0u);
}

TEST(Viewpoint, SideOnlyConceptScoresHigherInSideBin) {
  std::vector<GroundTruthInstance> gts;
  std::unordered_map<std::string, Viewpoint> vps;
  std::vector<Detection> dets;
  float score = 1.0f;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "i" + std::to_string(i);
    const Viewpoint vp = kViewpointBins[i % 5];
    vps[id] = vp;
    gts.push_back(gt(id, "door", 50, 50));
    if (vp == Viewpoint::side) dets.push_back(det(id, 50, 50, score));
    dets.push_back(det(id, 200, 200, score - 0.5f));
    score -= 0.01f;
  }
  vps["ghost"] = Viewpoint::unknown;
  sort_by_rank(dets);
  const std::vector<std::vector<Detection>> all = {dets};
  const std::vector<uint32_t> ids = {0};
  const auto report = evaluate(all, ids, gts, vps, {});
  const double pooled = *report.best_concepts.rows[0].ap;
  std::optional<double> side;
  for (const auto& [bin, table] : report.viewpoint->per_bin) {
    if (bin == Viewpoint::side) side = table.rows[0].ap;
  }
  ASSERT_TRUE(side.has_value());
  EXPECT_EQ(*side, 1.0);
  EXPECT_GT(*side, pooled);
  EXPECT_EQ(report.viewpoint->best_bin_rows[0].best_bin, Viewpoint::side);
  EXPECT_EQ(report.viewpoint->excluded_images, 1u);
}

TEST(Evaluate, RepeatableAndThreadIndependent) {
  std::mt19937_64 rng(28);
  std::vector<GroundTruthInstance> gts;
  for (const char* part : {"a", "b", "c", "d", "e", "f"}) {
    auto some = oracle::random_ground_truth(rng, 15, 6, 224.0, part);
    gts.insert(gts.end(), some.begin(), some.end());
  }
  std::vector<std::vector<Detection>> dets;
  std::vector<uint32_t> ids;
  for (uint32_t k = 0; k < 12; ++k) {
    auto d = oracle::random_detections(rng, 100, 6, 224.0, false);
    for (auto& x : d) x.concept_id = k;
    sort_by_rank(d);
    dets.push_back(d);
    ids.push_back(k);
  }
  EvalOptions one;
  EvalOptions many;
  many.threads = 5;
  const auto a = evaluate(dets, ids, gts, {}, one);
  const auto b = evaluate(dets, ids, gts, {}, many);
  EXPECT_EQ(a.matrix.values, b.matrix.values);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    EXPECT_EQ(a.subsets[k].parts, b.subsets[k].parts);
    EXPECT_EQ(a.subsets[k].ap, b.subsets[k].ap);
  }
  EXPECT_EQ(a.histograms.subset_sizes, b.histograms.subset_sizes);
  for (const auto& row : a.best_concepts.rows) {
    if (row.ap) {
      EXPECT_GE(*row.ap, 0.0);
      EXPECT_LE(*row.ap, 1.0);
    }
  }
  ASSERT_EQ(a.best_concept_curves.size(), a.best_concepts.rows.size());
  for (std::size_t p = 0; p < a.best_concept_curves.size(); ++p) {
    EXPECT_EQ(a.best_concept_curves[p].ap, a.best_concepts.rows[p].ap);
  }
}

TEST(Evaluate, GroupByConcept) {
  std::vector<Detection> dets = {det("a", 0, 0, 0.9f, 5), det("a", 0, 0, 0.8f, 2), det("b", 0, 0, 0.7f, 5)};
  const auto [ids, groups] = group_by_concept(dets);
  EXPECT_EQ(ids, (std::vector<uint32_t>{2, 5}));
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[1].size(), 2u);
  EXPECT_EQ(groups[1][1].image_id, "b");
}
