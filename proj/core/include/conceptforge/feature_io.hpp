#pragma once

#include <filesystem>
#include <string>

#include "conceptforge/tensor.hpp"

namespace conceptforge {

// Feature file layout (all integers little-endian):
//   "VCFT0001"                                  8 bytes
//   width, height, channels, meta_length        4 x u32
//   metadata                                    meta_length bytes, UTF-8 key=value lines
//   data                                        width*height*channels f32, (y, x, channel)

inline constexpr char kFeatureMagic[] = "VCFT0001";

std::string encode_feature_tensor(const FeatureTensor& tensor);
/// Throws FormatError naming the byte offset of the first problem.
FeatureTensor decode_feature_tensor(std::string_view bytes);

void write_feature_file(const FeatureTensor& tensor, const std::filesystem::path& path);
FeatureTensor read_feature_file(const std::filesystem::path& path);

}  // namespace conceptforge
