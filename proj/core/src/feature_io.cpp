#include "conceptforge/feature_io.hpp"

#include "binary.hpp"
#include "keyvalue.hpp"

namespace conceptforge {

namespace {

constexpr std::size_t kMagicSize = 8;

detail::KeyValues meta_to_kv(const FeatureTensor& t) {
  const auto& m = t.meta();
  detail::KeyValues kv = {
      {"image_id", m.image_id},
      {"object_class", m.object_class},
      {"crop_width", std::to_string(m.crop_width)},
      {"crop_height", std::to_string(m.crop_height)},
      {"viewpoint", std::string(to_string(m.viewpoint))},
  };
  if (!m.source_path.empty()) kv.emplace_back("source_path", m.source_path);
  kv.emplace_back("layer", t.layer().name);
  kv.emplace_back("layer_stride", std::to_string(t.layer().stride));
  kv.emplace_back("layer_rf_size", std::to_string(t.layer().rf_size));
  kv.emplace_back("layer_offset", detail::format_double(t.layer().offset));
  return kv;
}

template <typename T>
T required_number(const detail::KeyValues& kv, std::string_view key, std::size_t offset) {
  const auto* v = detail::find_value(kv, key);
  if (!v) throw FormatError("metadata missing '" + std::string(key) + "'", offset);
  auto n = detail::parse_number<T>(*v);
  if (!n) throw FormatError("metadata '" + std::string(key) + "' is not a number", offset);
  return *n;
}

}  // namespace

std::string encode_feature_tensor(const FeatureTensor& tensor) {
  const std::string meta = detail::format_key_values(meta_to_kv(tensor));
  std::string out;
  out.reserve(kMagicSize + 16 + meta.size() + tensor.data().size() * 4);
  out.append(kFeatureMagic, kMagicSize);
  detail::put_u32(out, tensor.width());
  detail::put_u32(out, tensor.height());
  detail::put_u32(out, tensor.channels());
  detail::put_u32(out, static_cast<uint32_t>(meta.size()));
  out += meta;
  detail::put_f32s(out, tensor.data());
  return out;
}

FeatureTensor decode_feature_tensor(std::string_view bytes) {
  detail::Reader in(bytes);
  if (in.take(kMagicSize, "magic") != std::string_view(kFeatureMagic, kMagicSize)) {
    throw FormatError("bad magic, expected VCFT0001", 0);
  }
  const uint32_t width = in.u32("width");
  const uint32_t height = in.u32("height");
  const uint32_t channels = in.u32("channels");
  const uint32_t meta_length = in.u32("meta_length");
  if (channels == 0) throw FormatError("zero channels", 16);

  const std::size_t meta_offset = in.offset();
  const auto kv = detail::parse_key_values(in.take(meta_length, "metadata"), meta_offset);

  ImageMeta meta;
  if (const auto* v = detail::find_value(kv, "image_id")) meta.image_id = *v;
  if (const auto* v = detail::find_value(kv, "object_class")) meta.object_class = *v;
  if (const auto* v = detail::find_value(kv, "source_path")) meta.source_path = *v;
  meta.crop_width = required_number<uint32_t>(kv, "crop_width", meta_offset);
  meta.crop_height = required_number<uint32_t>(kv, "crop_height", meta_offset);
  if (const auto* v = detail::find_value(kv, "viewpoint")) {
    try {
      meta.viewpoint = parse_viewpoint(*v);
    } catch (const DataError&) {
      throw FormatError("bad viewpoint '" + *v + "'", meta_offset);
    }
  }

  LayerSpec layer;
  const auto* layer_name = detail::find_value(kv, "layer");
  if (!layer_name) throw FormatError("metadata missing 'layer'", meta_offset);
  layer.name = *layer_name;
  if (detail::find_value(kv, "layer_stride")) {
    layer.stride = required_number<uint32_t>(kv, "layer_stride", meta_offset);
    layer.rf_size = required_number<uint32_t>(kv, "layer_rf_size", meta_offset);
    layer.offset = required_number<double>(kv, "layer_offset", meta_offset);
  } else if (auto builtin = find_vgg16_layer(layer.name)) {
    layer = *builtin;
  } else {
    throw FormatError("layer '" + layer.name + "' has no geometry", meta_offset);
  }
  layer.channels = channels;

  const std::size_t count = std::size_t{width} * height * channels;
  if (in.remaining() != count * 4) {
    if (in.remaining() < count * 4) throw FormatError("truncated payload", in.offset());
    throw FormatError("trailing bytes after payload", in.offset() + count * 4);
  }
  std::vector<float> data(count);
  in.finite_f32s(data, "payload");
  return FeatureTensor(std::move(meta), std::move(layer), width, height, std::move(data));
}

void write_feature_file(const FeatureTensor& tensor, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_feature_tensor(tensor));
}

FeatureTensor read_feature_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  try {
    return decode_feature_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace conceptforge
