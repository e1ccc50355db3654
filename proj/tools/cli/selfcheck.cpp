#include "cli/selfcheck.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "conceptforge/dictionary_io.hpp"
#include "conceptforge/error.hpp"
#include "conceptforge/report.hpp"

namespace conceptforge::cli {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

}  // namespace

bool SelfcheckResult::part_ap_ok() const {
  if (report.best_concepts.rows.empty()) return false;
  for (const auto& row : report.best_concepts.rows) {
    if (!row.ap || *row.ap < options.part_ap_required) return false;
  }
  return true;
}

SelfcheckResult run_selfcheck(const SelfcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SelfcheckResult r;
  r.options = options;
  r.corpus = generate_synthetic_corpus(options.spec, options.seed);
  const auto& layer = options.spec.layer;

  LearnOptions learn;
  learn.k = options.k;
  learn.seed = options.seed;
  learn.lloyd.threads = options.threads;
  learn.object_class = options.spec.object_class;
  r.raw = learn_dictionary(r.corpus.tensors, layer, learn);
  r.merged = merge_dictionary(r.raw, options.merge_threshold);

  for (const auto& planted : r.corpus.planted_centroids) {
    double best = -1.0;
    for (const auto& vc : r.merged.concepts) best = std::max(best, cosine_similarity(planted, vc.centroid));
    r.planted_best_cosine.push_back(best);
    if (best >= options.recovery_cosine) ++r.recovered;
  }

  DetectOptions detect_options;
  detect_options.threads = options.threads;
  r.detections = detect_all(r.merged, r.corpus.tensors, detect_options);
  for (const auto& vc : r.merged.concepts) r.concept_ids.push_back(vc.id);

  std::unordered_map<std::string, Viewpoint> viewpoints;
  for (const auto& t : r.corpus.tensors) viewpoints.emplace(t.image_id(), t.meta().viewpoint);
  EvalOptions eval_options;
  eval_options.threads = options.threads;
  r.report = evaluate(r.detections, r.concept_ids, r.corpus.ground_truth, viewpoints, eval_options);

  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string format_selfcheck_summary(const SelfcheckResult& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "dictionary: K=%u -> %zu concepts after merging at %.2f\n",
                r.options.k, r.merged.concepts.size(), r.options.merge_threshold);
  out += line;
  std::snprintf(line, sizeof line, "planted recovery: %u/%zu at cosine >= %.2f (need %u)\n",
                r.recovered, r.planted_best_cosine.size(), r.options.recovery_cosine,
                r.options.recovery_required);
  out += line;
  for (std::size_t i = 0; i < r.planted_best_cosine.size(); ++i) {
    if (r.planted_best_cosine[i] >= r.options.recovery_cosine) continue;
    std::snprintf(line, sizeof line, "  %s missed, best cosine %.4f\n",
                  synthetic_part_id(static_cast<uint32_t>(i)).c_str(), r.planted_best_cosine[i]);
    out += line;
  }
  std::size_t below = 0;
  double lowest = 1.0;
  for (const auto& row : r.report.best_concepts.rows) {
    const double ap = row.ap.value_or(0.0);
    lowest = std::min(lowest, ap);
    if (ap < r.options.part_ap_required) ++below;
  }
  std::snprintf(line, sizeof line,
                "best-concept AP: mAP %.4f, min %.4f, %zu/%zu parts below %.2f\n",
                r.report.best_concepts.mean_ap.value_or(0.0), lowest, below,
                r.report.best_concepts.rows.size(), r.options.part_ap_required);
  out += line;
  std::snprintf(line, sizeof line, "elapsed: %.1f s\n", r.seconds);
  out += line;
  out += r.passed() ? "selfcheck: PASS\n" : "selfcheck: FAIL\n";
  return out;
}

std::vector<Detection> flatten(const std::vector<std::vector<Detection>>& per_concept) {
  std::vector<Detection> all;
  for (const auto& list : per_concept) all.insert(all.end(), list.begin(), list.end());
  return all;
}

std::string join_ids(const std::vector<uint32_t>& ids) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += ',';
    out += std::to_string(id);
  }
  return out;
}

void write_selfcheck_artifacts(const SelfcheckResult& r, const std::filesystem::path& dir,
                               const KeyValues& config) {
  std::filesystem::create_directories(dir);
  auto raw = r.raw;
  auto merged = r.merged;
  raw.extra.insert(raw.extra.end(), config.begin(), config.end());
  merged.extra.insert(merged.extra.end(), config.begin(), config.end());
  write_dictionary_file(raw, dir / "dictionary.vcdc");
  write_dictionary_file(merged, dir / "merged.vcdc");

  KeyValues header = config;
  header.emplace_back("concept_ids", join_ids(r.concept_ids));
  write_detections(flatten(r.detections), dir / "detections.txt", header);

  auto report = r.report;
  report.provenance.insert(report.provenance.end(), config.begin(), config.end());
  write_text(dir / "report.txt", format_report_text(report));
  write_text(dir / "ap_matrix.txt", format_ap_matrix(report));
}

}  // namespace conceptforge::cli
