#include "cli/run_config.hpp"

#include <charconv>
#include <fstream>

#include "conceptforge/error.hpp"

namespace conceptforge::cli {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

KeyValues RunConfig::pairs() const {
  KeyValues kv = {
      {"subcommand", subcommand},
      {"corpus", corpus},
      {"layer", layer},
      {"class", object_class},
      {"k", k ? std::to_string(*k) : "channels"},
      {"seed", std::to_string(seed)},
      {"merge_threshold", format_number(merge_threshold)},
      {"nms_radius", nms_radius ? format_number(*nms_radius) : "2*stride"},
      {"match_radius", format_number(match_radius)},
      {"subset_max", std::to_string(subset_max)},
      {"out", out},
      {"threads", std::to_string(threads)},
  };
  return kv;
}

KeyValues RunConfig::artifact_pairs() const {
  KeyValues kv;
  for (auto& [key, value] : pairs()) {
    if (key == "out" || key == "threads") continue;
    kv.emplace_back("config." + key, value);
  }
  kv.emplace_back("run_config", kProvenanceFileName);
  return kv;
}

void write_provenance(const std::filesystem::path& dir, const RunConfig& config,
                      const KeyValues& extra) {
  std::filesystem::create_directories(dir);
  const auto path = dir / kProvenanceFileName;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << "# conceptforge run configuration\n";
  for (const auto& [k, v] : config.pairs()) f << k << '=' << v << '\n';
  for (const auto& [k, v] : extra) f << k << '=' << v << '\n';
  if (!f) throw DataError("cannot write " + path.string());
}

}  // namespace conceptforge::cli
