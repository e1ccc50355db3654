#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cli/run_config.hpp"
#include "conceptforge/concepts.hpp"
#include "conceptforge/detector.hpp"
#include "conceptforge/evaluation.hpp"
#include "conceptforge/synthetic.hpp"

namespace conceptforge::cli {

struct SelfcheckOptions {
  uint64_t seed = 1;
  unsigned threads = 1;
  uint32_t k = 64;
  double merge_threshold = 0.95;
  double recovery_cosine = 0.99;
  uint32_t recovery_required = 15;
  double part_ap_required = 0.95;
  SyntheticSpec spec;  // 200 images, 14x14x512, 16 concepts, sigma 0.05
};

struct SelfcheckResult {
  SelfcheckOptions options;
  SyntheticCorpus corpus;
  ConceptDictionary raw;
  ConceptDictionary merged;
  std::vector<uint32_t> concept_ids;
  std::vector<std::vector<Detection>> detections;  // per merged concept
  EvalReport report;
  std::vector<double> planted_best_cosine;  // per planted centroid
  uint32_t recovered = 0;
  double seconds = 0.0;

  bool recovery_ok() const { return recovered >= options.recovery_required; }
  /// Every planted part's best concept reaches the AP threshold.
  bool part_ap_ok() const;
  bool passed() const { return recovery_ok() && part_ap_ok(); }
};

/// synth -> cluster -> merge -> detect -> eval on the built-in synthetic corpus.
SelfcheckResult run_selfcheck(const SelfcheckOptions& options);

std::string format_selfcheck_summary(const SelfcheckResult& result);

/// dictionary.vcdc, merged.vcdc, detections.txt, report.txt, ap_matrix.txt.
void write_selfcheck_artifacts(const SelfcheckResult& result, const std::filesystem::path& dir,
                               const KeyValues& config);

/// Concatenation of per-concept detection lists, in concept order.
std::vector<Detection> flatten(const std::vector<std::vector<Detection>>& per_concept);

/// "3,5,8"
std::string join_ids(const std::vector<uint32_t>& ids);

}  // namespace conceptforge::cli
