#include "conceptforge/corpus.hpp"

#include <algorithm>

#include "conceptforge/error.hpp"
#include "conceptforge/feature_io.hpp"

namespace conceptforge {

std::vector<std::string> Corpus::image_ids() const {
  std::vector<std::string> ids;
  ids.reserve(tensors.size());
  for (const auto& t : tensors) ids.push_back(t.image_id());
  return ids;
}

std::vector<ImageMeta> Corpus::metas() const {
  std::vector<ImageMeta> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(t.meta());
  return out;
}

std::string feature_file_name(std::string_view image_id, std::string_view layer_name) {
  std::string name(image_id);
  name += '.';
  name += layer_name;
  name += ".vcft";
  return name;
}

void write_corpus(const std::filesystem::path& dir, std::span<const FeatureTensor> tensors,
                  std::span<const GroundTruthInstance> annotations) {
  std::filesystem::create_directories(dir);
  for (const auto& t : tensors) {
    write_feature_file(t, dir / feature_file_name(t.image_id(), t.layer().name));
  }
  write_annotations(annotations, dir / kAnnotationFileName);
}

Corpus load_corpus(const std::filesystem::path& dir, std::string_view layer_name,
                   const MergeMap* merge) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("corpus directory " + dir.string() + " does not exist");
  }
  const std::string suffix = "." + std::string(layer_name) + ".vcft";
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix)) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  Corpus corpus;
  corpus.tensors.reserve(files.size());
  for (const auto& f : files) corpus.tensors.push_back(read_feature_file(f));
  std::stable_sort(corpus.tensors.begin(), corpus.tensors.end(),
                   [](const FeatureTensor& a, const FeatureTensor& b) {
                     return a.image_id() < b.image_id();
                   });
  for (std::size_t i = 1; i < corpus.tensors.size(); ++i) {
    if (corpus.tensors[i].image_id() == corpus.tensors[i - 1].image_id()) {
      throw DataError("duplicate image id " + corpus.tensors[i].image_id() + " in " +
                      dir.string());
    }
  }
  for (const auto& t : corpus.tensors) {
    if (t.layer().name != layer_name) {
      throw DataError(t.image_id() + ": file declares layer " + t.layer().name);
    }
    if (t.channels() != corpus.tensors.front().channels()) {
      throw DataError(t.image_id() + ": channel count differs from the rest of the corpus");
    }
  }

  const auto ann = dir / kAnnotationFileName;
  if (std::filesystem::exists(ann)) corpus.annotations = load_annotations(ann, merge);
  return corpus;
}

}  // namespace conceptforge
