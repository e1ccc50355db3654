#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "conceptforge/concepts.hpp"

namespace conceptforge {

// Dictionary file layout (little-endian):
//   "VCDC0001"                            8 bytes
//   n_concepts, channels, meta_length     3 x u32
//   metadata                              key=value lines (provenance)
//   per concept: concept_id u32, member_count u32, channels x f32

inline constexpr char kDictionaryMagic[] = "VCDC0001";

std::string encode_dictionary(const ConceptDictionary& dict);
ConceptDictionary decode_dictionary(std::string_view bytes);

void write_dictionary_file(const ConceptDictionary& dict, const std::filesystem::path& path);
ConceptDictionary read_dictionary_file(const std::filesystem::path& path);

}  // namespace conceptforge
