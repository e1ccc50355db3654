#include "conceptforge/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "binary.hpp"
#include "conceptforge/error.hpp"
#include "keyvalue.hpp"

namespace conceptforge {

namespace {

constexpr std::string_view kCarMap = R"(left_front_wheel -> wheel
left_back_wheel -> wheel
right_front_wheel -> wheel
right_back_wheel -> wheel
upper_left_windshield -> windshield
upper_right_windshield -> windshield
upper_left_rearwindow -> rearwindow
upper_right_rearwindow -> rearwindow
left_front_light -> headlight
right_front_light -> headlight
left_back_trunk -> trunk
right_back_trunk -> trunk
)";

constexpr std::string_view kMotorbikeMap = R"(left_front_wheel -> wheel
left_back_wheel -> wheel
right_front_wheel -> wheel
right_back_wheel -> wheel
left_handle_center -> handle
right_handle_center -> handle
front_seat -> seat
back_seat -> seat
headlight_center -> headlight
head_center -> DISCARD
)";

std::string_view strip_comment(std::string_view line) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  return line;
}

double parse_coordinate(std::string_view field, std::size_t line_number, const char* name) {
  auto v = detail::parse_number<double>(field);
  if (!v || !std::isfinite(*v)) {
    throw DataError("annotation line " + std::to_string(line_number) + ": bad " + name + " '" +
                    std::string(field) + "'");
  }
  return *v;
}

}  // namespace

MergeMap::MergeMap(std::map<std::string, std::string, std::less<>> rules)
    : rules_(std::move(rules)) {}

MergeMap MergeMap::parse(std::string_view text) {
  std::map<std::string, std::string, std::less<>> rules;
  detail::for_each_line(text, [&](std::size_t number, std::string_view line) {
    const auto body = strip_comment(line);
    if (detail::split_fields(body).empty()) return;
    const auto arrow = body.find("->");
    const auto lhs = arrow == std::string_view::npos ? std::vector<std::string_view>{}
                                                      : detail::split_fields(body.substr(0, arrow));
    const auto rhs = arrow == std::string_view::npos ? std::vector<std::string_view>{}
                                                      : detail::split_fields(body.substr(arrow + 2));
    if (lhs.size() != 1 || rhs.size() != 1) {
      throw DataError("merge map line " + std::to_string(number) +
                      ": expected 'raw_label -> merged_part_id'");
    }
    auto [it, inserted] = rules.emplace(std::string(lhs[0]), std::string(rhs[0]));
    if (!inserted && it->second != rhs[0]) {
      throw DataError("merge map line " + std::to_string(number) + ": conflicting rule for '" +
                      it->first + "'");
    }
  });
  return MergeMap(std::move(rules));
}

MergeMap MergeMap::load(const std::filesystem::path& path) {
  return parse(detail::read_file_bytes(path));
}

std::optional<MergeMap> MergeMap::builtin(std::string_view object_class) {
  if (object_class == "car") return parse(kCarMap);
  if (object_class == "motorbike") return parse(kMotorbikeMap);
  return std::nullopt;
}

std::optional<std::string_view> MergeMap::lookup(std::string_view raw_label) const {
  auto it = rules_.find(raw_label);
  if (it == rules_.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::vector<GroundTruthInstance> parse_annotations(std::string_view text, const MergeMap* merge) {
  std::vector<GroundTruthInstance> out;
  std::set<std::string> unknown;
  detail::for_each_line(text, [&](std::size_t number, std::string_view line) {
    auto fields = detail::split_fields(strip_comment(line));
    if (fields.empty()) return;
    if (fields.size() < 4 || fields.size() > 7) {
      throw DataError("annotation line " + std::to_string(number) + ": expected 4 to 7 fields, got " +
                      std::to_string(fields.size()));
    }
    GroundTruthInstance gt;
    gt.image_id = std::string(fields[0]);
    gt.center = {parse_coordinate(fields[2], number, "x"), parse_coordinate(fields[3], number, "y")};
    std::size_t next = 4;
    if (fields.size() >= 6) {
      const double w = parse_coordinate(fields[4], number, "w");
      const double h = parse_coordinate(fields[5], number, "h");
      if (w < 0 || h < 0) {
        throw DataError("annotation line " + std::to_string(number) + ": negative box size");
      }
      gt.box = PartBox{gt.center.x - w / 2.0, gt.center.y - h / 2.0, w, h};
      next = 6;
    }
    if (next < fields.size()) {
      try {
        gt.viewpoint = parse_viewpoint(fields[next]);
      } catch (const DataError&) {
        throw DataError("annotation line " + std::to_string(number) + ": bad viewpoint '" +
                        std::string(fields[next]) + "'");
      }
    }
    if (merge) {
      auto merged = merge->lookup(fields[1]);
      if (!merged) {
        unknown.emplace(fields[1]);
        return;
      }
      if (*merged == MergeMap::kDiscard) return;
      gt.part_id = std::string(*merged);
    } else {
      gt.part_id = std::string(fields[1]);
    }
    out.push_back(std::move(gt));
  });
  if (!unknown.empty()) {
    std::string labels;
    for (const auto& label : unknown) labels += (labels.empty() ? "" : ", ") + label;
    throw DataError("labels without merge rule: " + labels);
  }
  return out;
}

std::vector<GroundTruthInstance> load_annotations(const std::filesystem::path& path,
                                                  const MergeMap* merge) {
  return parse_annotations(detail::read_file_bytes(path), merge);
}

std::string format_annotations(std::span<const GroundTruthInstance> instances) {
  std::string out;
  for (const auto& gt : instances) {
    out += gt.image_id + ' ' + gt.part_id + ' ' + detail::format_double(gt.center.x) + ' ' +
           detail::format_double(gt.center.y);
    if (gt.box) {
      out += ' ' + detail::format_double(gt.box->width) + ' ' +
             detail::format_double(gt.box->height);
    }
    if (gt.viewpoint != Viewpoint::unknown) {
      out += ' ';
      out += to_string(gt.viewpoint);
    }
    out += '\n';
  }
  return out;
}

void write_annotations(std::span<const GroundTruthInstance> instances,
                       const std::filesystem::path& path) {
  detail::write_file_bytes(path, format_annotations(instances));
}

std::vector<std::string> missing_annotation_images(std::span<const GroundTruthInstance> instances,
                                                   std::span<const std::string> known_image_ids) {
  std::unordered_set<std::string_view> known(known_image_ids.begin(), known_image_ids.end());
  std::set<std::string> missing;
  for (const auto& gt : instances) {
    if (!known.contains(gt.image_id)) missing.insert(gt.image_id);
  }
  return {missing.begin(), missing.end()};
}

std::vector<std::string> check_annotation_bounds(std::span<const GroundTruthInstance> instances,
                                                 std::span<const ImageMeta> metas) {
  std::unordered_map<std::string_view, const ImageMeta*> by_id;
  for (const auto& m : metas) by_id.emplace(m.image_id, &m);
  std::vector<std::string> problems;
  for (const auto& gt : instances) {
    auto it = by_id.find(gt.image_id);
    if (it == by_id.end()) continue;
    const auto& m = *it->second;
    if (gt.center.x < 0 || gt.center.y < 0 || gt.center.x >= m.crop_width ||
        gt.center.y >= m.crop_height) {
      problems.push_back(gt.image_id + " " + gt.part_id + ": center outside " +
                         std::to_string(m.crop_width) + "x" + std::to_string(m.crop_height) +
                         " crop");
    }
  }
  return problems;
}

std::vector<std::string> part_ids(std::span<const GroundTruthInstance> instances) {
  std::set<std::string> parts;
  for (const auto& gt : instances) parts.insert(gt.part_id);
  return {parts.begin(), parts.end()};
}

}  // namespace conceptforge
