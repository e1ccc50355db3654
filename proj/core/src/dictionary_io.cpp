#include "conceptforge/dictionary_io.hpp"

#include <array>
#include <string_view>

#include "binary.hpp"
#include "keyvalue.hpp"

namespace conceptforge {

namespace {

constexpr std::size_t kMagicSize = 8;
constexpr std::array<std::string_view, 9> kKnownKeys = {
    "object_class", "layer",   "layer_stride",    "layer_rf_size", "layer_offset",
    "k_initial",    "seed",    "merge_threshold", "n_samples"};

bool is_known(std::string_view key) {
  for (auto k : kKnownKeys) {
    if (k == key) return true;
  }
  return false;
}

template <typename T>
T number(const detail::KeyValues& kv, std::string_view key, std::size_t offset) {
  const auto* v = detail::find_value(kv, key);
  if (!v) throw FormatError("metadata missing '" + std::string(key) + "'", offset);
  auto n = detail::parse_number<T>(*v);
  if (!n) throw FormatError("metadata '" + std::string(key) + "' is not a number", offset);
  return *n;
}

}  // namespace

std::string encode_dictionary(const ConceptDictionary& dict) {
  const auto& p = dict.provenance;
  detail::KeyValues kv = {
      {"object_class", dict.object_class},
      {"layer", dict.layer.name},
      {"layer_stride", std::to_string(dict.layer.stride)},
      {"layer_rf_size", std::to_string(dict.layer.rf_size)},
      {"layer_offset", detail::format_double(dict.layer.offset)},
      {"k_initial", std::to_string(p.k_initial)},
      {"seed", std::to_string(p.seed)},
      {"merge_threshold", p.merge_threshold < 0 ? "none" : detail::format_double(p.merge_threshold)},
      {"n_samples", std::to_string(p.n_samples)},
  };
  for (const auto& entry : dict.extra) {
    if (is_known(entry.first)) continue;
    kv.push_back(entry);
  }
  const std::string meta = detail::format_key_values(kv);
  const std::size_t channels = dict.layer.channels;

  std::string out;
  out.reserve(kMagicSize + 12 + meta.size() + dict.concepts.size() * (8 + channels * 4));
  out.append(kDictionaryMagic, kMagicSize);
  detail::put_u32(out, static_cast<uint32_t>(dict.concepts.size()));
  detail::put_u32(out, static_cast<uint32_t>(channels));
  detail::put_u32(out, static_cast<uint32_t>(meta.size()));
  out += meta;
  for (const auto& c : dict.concepts) {
    if (c.centroid.size() != channels) {
      throw DataError("concept " + std::to_string(c.id) + " has " +
                      std::to_string(c.centroid.size()) + " channels, dictionary has " +
                      std::to_string(channels));
    }
    detail::put_u32(out, c.id);
    detail::put_u32(out, c.member_count);
    detail::put_f32s(out, c.centroid);
  }
  return out;
}

ConceptDictionary decode_dictionary(std::string_view bytes) {
  detail::Reader in(bytes);
  if (in.take(kMagicSize, "magic") != std::string_view(kDictionaryMagic, kMagicSize)) {
    throw FormatError("bad magic, expected VCDC0001", 0);
  }
  const uint32_t n_concepts = in.u32("n_concepts");
  const uint32_t channels = in.u32("channels");
  const uint32_t meta_length = in.u32("meta_length");
  const std::size_t meta_offset = in.offset();
  const auto kv = detail::parse_key_values(in.take(meta_length, "metadata"), meta_offset);

  ConceptDictionary dict;
  if (const auto* v = detail::find_value(kv, "object_class")) dict.object_class = *v;
  const auto* layer = detail::find_value(kv, "layer");
  if (!layer) throw FormatError("metadata missing 'layer'", meta_offset);
  dict.layer.name = *layer;
  dict.layer.channels = channels;
  dict.layer.stride = number<uint32_t>(kv, "layer_stride", meta_offset);
  dict.layer.rf_size = number<uint32_t>(kv, "layer_rf_size", meta_offset);
  dict.layer.offset = number<double>(kv, "layer_offset", meta_offset);
  dict.provenance.k_initial = number<uint32_t>(kv, "k_initial", meta_offset);
  dict.provenance.seed = number<uint64_t>(kv, "seed", meta_offset);
  dict.provenance.n_samples = number<uint64_t>(kv, "n_samples", meta_offset);
  const auto* threshold = detail::find_value(kv, "merge_threshold");
  if (!threshold) throw FormatError("metadata missing 'merge_threshold'", meta_offset);
  if (*threshold == "none") {
    dict.provenance.merge_threshold = -1.0;
  } else {
    dict.provenance.merge_threshold = number<double>(kv, "merge_threshold", meta_offset);
  }
  for (const auto& entry : kv) {
    if (!is_known(entry.first)) dict.extra.push_back(entry);
  }

  const std::size_t record = 8 + std::size_t{channels} * 4;
  if (in.remaining() != record * n_concepts) {
    if (in.remaining() < record * n_concepts) throw FormatError("truncated payload", in.offset());
    throw FormatError("trailing bytes after payload", in.offset() + record * n_concepts);
  }
  dict.concepts.resize(n_concepts);
  for (auto& c : dict.concepts) {
    c.id = in.u32("concept_id");
    c.member_count = in.u32("member_count");
    c.centroid.resize(channels);
    in.finite_f32s(c.centroid, "centroid");
  }
  return dict;
}

void write_dictionary_file(const ConceptDictionary& dict, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_dictionary(dict));
}

ConceptDictionary read_dictionary_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  try {
    return decode_dictionary(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace conceptforge
