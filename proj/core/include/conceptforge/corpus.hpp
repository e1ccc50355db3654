#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptforge/annotations.hpp"
#include "conceptforge/tensor.hpp"

namespace conceptforge {

/// Feature tensors of one layer, sorted by image id, plus their annotations.
struct Corpus {
  std::vector<FeatureTensor> tensors;
  std::vector<GroundTruthInstance> annotations;

  std::vector<std::string> image_ids() const;
  std::vector<ImageMeta> metas() const;
};

inline constexpr std::string_view kAnnotationFileName = "annotations.txt";

/// `<image_id>.<layer>.vcft`
std::string feature_file_name(std::string_view image_id, std::string_view layer_name);

/// Writes one feature file per tensor plus `annotations.txt`.
void write_corpus(const std::filesystem::path& dir, std::span<const FeatureTensor> tensors,
                  std::span<const GroundTruthInstance> annotations);

/// Loads every `*.<layer>.vcft` file under `dir` and `annotations.txt` when present.
Corpus load_corpus(const std::filesystem::path& dir, std::string_view layer_name,
                   const MergeMap* merge = nullptr);

}  // namespace conceptforge
