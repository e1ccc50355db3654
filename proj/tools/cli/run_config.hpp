#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace conceptforge::cli {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct RunConfig {
  std::string subcommand;
  std::string corpus;
  std::string layer = "pool4";
  std::string object_class;
  std::optional<uint32_t> k;  // unset: channel count of the layer
  uint64_t seed = 1;
  double merge_threshold = 0.95;
  std::optional<double> nms_radius;  // unset: twice the layer stride
  double match_radius = 56.0;
  uint32_t subset_max = 4;
  std::string out;
  unsigned threads = 1;

  /// Every field, including the output directory and thread count.
  KeyValues pairs() const;
  /// The fields that can influence results, prefixed "config."; this is what
  /// artifacts embed, so reruns into another directory or with another
  /// thread count produce identical bytes.
  KeyValues artifact_pairs() const;
};

/// Shortest round-trip decimal form.
std::string format_number(double v);

inline constexpr char kProvenanceFileName[] = "provenance.txt";

/// Writes provenance.txt under `dir`: the full RunConfig plus `extra`.
void write_provenance(const std::filesystem::path& dir, const RunConfig& config,
                      const KeyValues& extra = {});

}  // namespace conceptforge::cli
