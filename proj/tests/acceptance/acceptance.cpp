// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "cli/run.hpp"
#include "cli/selfcheck.hpp"
#include "conceptforge/concepts.hpp"
#include "conceptforge/detector.hpp"
#include "conceptforge/dictionary_io.hpp"
#include "conceptforge/evaluation.hpp"
#include "conceptforge/feature_io.hpp"
#include "conceptforge/layer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace conceptforge;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  std::cout << (v.ok ? "PASS" : "FAIL") << "  " << name;
  if (!v.detail.empty()) std::cout << "  (" << v.detail << ")";
  std::cout << std::endl;
  if (!v.ok) ++failures;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// Shared by the synthetic and MultipleSP criteria.
const cli::SelfcheckResult& selfcheck_result() {
  static const cli::SelfcheckResult result = [] {
    cli::SelfcheckOptions options;
    options.seed = 1;
    options.threads = std::max(1u, std::thread::hardware_concurrency());
    return cli::run_selfcheck(options);
  }();
  return result;
}

Verdict synthetic_end_to_end() {
  const auto& r = selfcheck_result();
  std::size_t weak = 0;
  double worst = 1.0;
  for (const auto& row : r.report.best_concepts.rows) {
    const double ap = row.ap.value_or(0.0);
    worst = std::min(worst, ap);
    weak += ap < r.options.part_ap_required;
  }
  const bool fast = r.seconds < 120.0;
  return {r.recovery_ok() && r.part_ap_ok() && fast,
          "recovered " + std::to_string(r.recovered) + "/16 at cos>=0.99 (need 15), " +
              std::to_string(weak) + " parts below AP 0.95, min part AP " + fmt(worst) + ", " +
              fmt(r.seconds, 3) + " s"};
}

Verdict lloyd_monotonicity() {
  std::size_t violations = 0;
  std::size_t steps = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 gen(seed);
    const std::size_t dim = 2 + gen() % 63;
    const std::size_t n = 50 + gen() % 1500;
    const std::size_t k = 2 + gen() % 19;
    const std::size_t blobs = 1 + gen() % 12;
    std::normal_distribution<float> g;
    std::vector<std::vector<float>> centers(blobs, std::vector<float>(dim));
    for (auto& c : centers) {
      for (auto& v : c) v = 3.0f * g(gen);
    }
    std::vector<float> data(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = centers[gen() % blobs];
      for (std::size_t d = 0; d < dim; ++d) data[i * dim + d] = c[d] + g(gen);
    }
    const Matrix<float> m(n, dim, std::move(data));
    Rng rng(seed);
    const auto fit = lloyd(m, kmeans_pp_seed(m, k, rng));
    for (std::size_t i = 1; i < fit.history.size(); ++i) {
      ++steps;
      if (fit.history[i] > fit.history[i - 1] * (1.0 + 1e-9)) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " increases over " +
                               std::to_string(steps) + " iterations"};
}

Verdict nms_oracle() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 200;
    auto dets = oracle::random_detections(rng, n, 1, 224.0, t % 2 == 0);
    const double radius = 5.0 + static_cast<double>(rng() % 76);
    if (nms(dets, radius) != oracle::nms(dets, radius)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + "/1000 instances differ"};
}

Verdict ap_oracle() {
  std::mt19937_64 rng(2025);
  double worst = 0.0;
  std::size_t presence = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<uint8_t> flags(rng() % 21);
    std::size_t tps = 0;
    for (auto& f : flags) tps += (f = static_cast<uint8_t>(rng() % 2));
    const std::size_t n_gt = tps + rng() % 4;
    const auto got = average_precision(flags, n_gt);
    const auto want = oracle::ap(flags, n_gt);
    if (got.has_value() != want.has_value()) {
      ++presence;
      continue;
    }
    if (got) worst = std::max(worst, std::abs(*got - *want));
  }
  const bool examples = average_precision(std::vector<uint8_t>{1}, 1) == 1.0 &&
                        average_precision(std::vector<uint8_t>{0, 1}, 1) == 0.5 &&
                        average_precision(std::vector<uint8_t>{1, 0, 1}, 2) == (1.0 + 2.0 / 3.0) / 2.0;
  return {worst <= 1e-12 && presence == 0 && examples,
          "max |diff| " + fmt(worst) + ", worked examples " + (examples ? "exact" : "WRONG")};
}

Verdict matching_oracle() {
  std::mt19937_64 rng(2026);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t nd = rng() % 21;
    const std::size_t ng = rng() % 11;
    auto dets = oracle::random_detections(rng, nd, 1 + static_cast<int>(rng() % 3), 224.0);
    sort_by_rank(dets);
    const auto gts = oracle::random_ground_truth(rng, ng, 3, 224.0, "p");
    const auto m = match_detections(dets, gts, kDefaultMatchRadius);
    const std::vector<int> got(m.matched_gt.begin(), m.matched_gt.end());
    if (got != oracle::exhaustive_match(dets, gts, kDefaultMatchRadius)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + "/1000 instances differ"};
}

Verdict multiple_sp_dominance() {
  const auto& r = selfcheck_result();
  std::size_t violations = 0;
  for (const auto& s : r.report.subsets) {
    if (s.ap && s.best_single_ap && *s.ap < *s.best_single_ap) ++violations;
  }

  // A concept halfway between planted concepts 0 and 1 fires on both parts.
  const auto& corpus = r.corpus;
  std::vector<float> mid(corpus.planted_centroids[0].size());
  for (std::size_t c = 0; c < mid.size(); ++c) {
    mid[c] = corpus.planted_centroids[0][c] + corpus.planted_centroids[1][c];
  }
  const VisualConcept pair{9999, l2_normalize(mid), 1};
  const auto dets = detect(pair, corpus.tensors, r.options.spec.layer);
  const GroundTruthSet set(corpus.ground_truth);
  const ConceptMatcher matcher(dets, set, kDefaultMatchRadius);
  const auto best = best_subset_per_concept(matcher, set.part_count(), 4);
  std::vector<uint32_t> want = {*set.find_part(synthetic_part_id(0)), *set.find_part(synthetic_part_id(1))};
  std::sort(want.begin(), want.end());
  const bool pair_ok = best.parts == want && best.ap && best.best_single_ap &&
                       *best.ap > *best.best_single_ap;
  return {violations == 0 && pair_ok,
          std::to_string(violations) + " concepts with subset AP < singleton AP; pair concept subset AP " +
              fmt(best.ap.value_or(-1)) + " vs singleton " + fmt(best.best_single_ap.value_or(-1)) +
              (best.parts == want ? ", subset is the planted pair" : ", subset is NOT the planted pair")};
}

Verdict determinism() {
  fixtures::TempDir dir("acceptance_det");
  std::ostringstream sink;
  for (const char* threads : {"1", "8"}) {
    cli::run_subcommand({"selfcheck", "--seed", "1", "--threads", threads, "--out",
                         (dir / (std::string("t") + threads)).string()},
                        sink, sink);
  }
  std::size_t differ = 0;
  std::string which;
  for (const char* file : {"dictionary.vcdc", "merged.vcdc", "detections.txt", "report.txt", "ap_matrix.txt"}) {
    const auto a = fixtures::slurp(dir / "t1" / file);
    const auto b = fixtures::slurp(dir / "t8" / file);
    if (a.empty() || a != b) {
      ++differ;
      which += std::string(" ") + file;
    }
  }
  return {differ == 0, differ == 0 ? "5 artifacts byte-identical" : "differ:" + which};
}

float random_finite(std::mt19937_64& rng) {
  for (;;) {
    const float f = std::bit_cast<float>(static_cast<uint32_t>(rng()));
    if (std::isfinite(f)) return f;
  }
}

Verdict format_round_trips() {
  fixtures::TempDir dir("acceptance_io");
  std::mt19937_64 rng(2027);
  std::size_t bad_features = 0;
  std::size_t bad_dicts = 0;
  for (int t = 0; t < 100; ++t) {
    const uint32_t w = 1 + static_cast<uint32_t>(rng() % 20);
    const uint32_t h = 1 + static_cast<uint32_t>(rng() % 20);
    const uint32_t c = 1 + static_cast<uint32_t>(rng() % 64);
    std::vector<float> data(std::size_t{w} * h * c);
    for (auto& v : data) v = random_finite(rng);
    ImageMeta meta;
    meta.image_id = "img_" + std::to_string(t);
    meta.object_class = t % 2 ? "car" : "motorbike";
    meta.crop_width = 224 + static_cast<uint32_t>(rng() % 100);
    meta.crop_height = 224;
    meta.viewpoint = static_cast<Viewpoint>(rng() % 6);
    const auto layer = vgg16_layers()[static_cast<std::size_t>(t % 3)];
    const FeatureTensor tensor(meta, {layer.name, c, layer.stride, layer.rf_size, layer.offset}, w, h,
                               std::move(data));
    const auto path = dir / ("f" + std::to_string(t) + ".vcft");
    write_feature_file(tensor, path);
    const auto first = fixtures::slurp(path);
    write_feature_file(read_feature_file(path), path);
    if (fixtures::slurp(path) != first) ++bad_features;

    ConceptDictionary d;
    d.object_class = meta.object_class;
    d.layer = {layer.name, c, layer.stride, layer.rf_size, layer.offset};
    d.provenance = {static_cast<uint32_t>(rng() % 1000), rng(), t % 2 ? 0.95 : -1.0, rng() % 100000};
    d.extra = {{"config.seed", std::to_string(t)}};
    for (std::size_t k = 0, n = rng() % 30; k < n; ++k) {
      VisualConcept vc{static_cast<uint32_t>(rng()), std::vector<float>(c), static_cast<uint32_t>(rng())};
      for (auto& v : vc.centroid) v = random_finite(rng);
      d.concepts.push_back(std::move(vc));
    }
    const auto dpath = dir / ("d" + std::to_string(t) + ".vcdc");
    write_dictionary_file(d, dpath);
    const auto dfirst = fixtures::slurp(dpath);
    write_dictionary_file(read_dictionary_file(dpath), dpath);
    if (fixtures::slurp(dpath) != dfirst) ++bad_dicts;
  }
  return {bad_features == 0 && bad_dicts == 0,
          std::to_string(bad_features) + " feature files and " + std::to_string(bad_dicts) +
              " dictionaries changed"};
}

Verdict receptive_field_table() {
  std::string detail;
  bool ok = true;
  for (const auto& layer : vgg16_layers()) {
    const auto f = oracle::recurrence(oracle::vgg16_steps(layer.name));
    const bool match = f.jump == layer.stride && f.size == layer.rf_size && f.start == layer.offset;
    ok &= match;
    detail += layer.name + (match ? " ok " : " MISMATCH ");
  }
  return {ok, detail.substr(0, detail.size() - 1)};
}

}  // namespace

int main() {
  std::cout << "acceptance suite" << std::endl;
  report("synthetic end-to-end (K=64, merge 0.95)", synthetic_end_to_end);
  report("Lloyd objective monotone over 100 instances", lloyd_monotonicity);
  report("NMS equals brute-force oracle on 1000 instances", nms_oracle);
  report("AP equals direct definition on 1000 instances", ap_oracle);
  report("greedy matching equals exhaustive assignment", matching_oracle);
  report("MultipleSP dominance and planted pair", multiple_sp_dominance);
  report("selfcheck artifacts identical at 1 and 8 threads", determinism);
  report("feature and dictionary files round-trip bitwise", format_round_trips);
  report("receptive-field table matches recurrence", receptive_field_table);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
