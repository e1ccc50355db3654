#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "conceptforge/layer.hpp"
#include "conceptforge/tensor.hpp"

namespace fixtures {

/// A scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cf") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

/// Small layer geometry for hand-built tensors.
inline conceptforge::LayerSpec tiny_layer(uint32_t channels) {
  return {"pool4", channels, 16, 100, 7.5};
}

inline conceptforge::FeatureTensor make_tensor(const std::string& id, uint32_t width,
                                               uint32_t height, uint32_t channels,
                                               std::vector<float> data) {
  conceptforge::ImageMeta meta;
  meta.image_id = id;
  meta.object_class = "test";
  meta.crop_width = width * 16;
  meta.crop_height = height * 16;
  return {meta, tiny_layer(channels), width, height, std::move(data)};
}

inline conceptforge::FeatureTensor random_tensor(std::mt19937_64& rng, const std::string& id,
                                                 uint32_t width, uint32_t height,
                                                 uint32_t channels) {
  std::normal_distribution<float> g;
  std::vector<float> data(std::size_t{width} * height * channels);
  for (auto& v : data) v = g(rng);
  return make_tensor(id, width, height, channels, std::move(data));
}

}  // namespace fixtures
