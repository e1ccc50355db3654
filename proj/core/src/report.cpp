#include "conceptforge/report.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "conceptforge/error.hpp"
#include "keyvalue.hpp"

namespace conceptforge {

namespace {

std::string fixed(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string exact(std::optional<double> v) { return v ? detail::format_double(*v) : "absent"; }

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string join_parts(const std::vector<uint32_t>& parts, std::span<const std::string> names) {
  std::string out;
  for (auto p : parts) {
    if (!out.empty()) out += '+';
    out += names[p];
  }
  return out;
}

std::size_t part_column_width(std::span<const std::string> parts) {
  std::size_t w = 10;
  for (const auto& p : parts) w = std::max(w, p.size() + 2);
  return w;
}

}  // namespace

std::string format_report_text(const EvalReport& report) {
  const auto& parts = report.matrix.parts;
  const std::size_t pw = part_column_width(parts);
  std::string out = "conceptforge evaluation report\n\n[provenance]\n";
  for (const auto& [k, v] : report.provenance) out += k + "=" + v + "\n";

  out += "\nBest concept per part (match radius " + detail::format_double(report.options.match_radius) +
         " px, AP " + std::string(to_string(report.options.mode)) +
         ", no per-image detection cap)\n";
  out += pad("part", pw) + pad("concept", 10) + "AP\n";
  for (const auto& row : report.best_concepts.rows) {
    out += pad(row.part, pw) + pad(row.concept_id ? std::to_string(*row.concept_id) : "-", 10) +
           fixed(row.ap) + "\n";
  }
  out += pad("mAP", pw + 10) + fixed(report.best_concepts.mean_ap) + "\n";

  out += "\nSingleSP / MultipleSP AP histogram (" + std::to_string(report.subsets.size()) +
         " concepts, subsets up to " + std::to_string(report.options.subset_max) + " parts)\n";
  out += pad("AP bin", 14) + pad("SingleSP", 10) + "MultipleSP\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    char label[32];
    std::snprintf(label, sizeof label, "[%.1f, %.1f%c", b / 10.0, (b + 1) / 10.0,
                  b + 1 == kHistogramBins ? ']' : ')');
    out += pad(label, 14) + pad(std::to_string(report.histograms.single_sp[b]), 10) +
           std::to_string(report.histograms.multiple_sp[b]) + "\n";
  }

  out += "\nBest-subset size distribution\n" + pad("size", 6) + "concepts\n";
  for (const auto& [size, count] : report.histograms.subset_sizes) {
    out += pad(std::to_string(size), 6) + std::to_string(count) + "\n";
  }

  out += "\nBest subset per concept\n" + pad("concept", 10) + pad("SingleSP", 10) +
         pad("MultipleSP", 12) + "subset\n";
  for (const auto& s : report.subsets) {
    out += pad(std::to_string(s.concept_id), 10) + pad(fixed(s.best_single_ap), 10) +
           pad(fixed(s.ap), 12) + (s.parts.empty() ? "-" : join_parts(s.parts, parts)) + "\n";
  }

  if (report.viewpoint) {
    const auto& vp = *report.viewpoint;
    out += "\nViewpoint control (best concept AP per bin)\n" + pad("part", pw);
    for (const auto& [bin, table] : vp.per_bin) out += pad(std::string(to_string(bin)), 12);
    out += pad("best", 8) + "best bin\n";
    for (std::size_t p = 0; p < vp.best_bin_rows.size(); ++p) {
      out += pad(vp.best_bin_rows[p].part, pw);
      for (const auto& [bin, table] : vp.per_bin) out += pad(fixed(table.rows[p].ap), 12);
      out += pad(fixed(vp.best_bin_rows[p].best_ap), 8) +
             (vp.best_bin_rows[p].best_ap ? std::string(to_string(vp.best_bin_rows[p].best_bin))
                                          : "-") +
             "\n";
    }
    out += pad("mAP", pw);
    for (const auto& [bin, table] : vp.per_bin) out += pad(fixed(table.mean_ap), 12);
    out += fixed(vp.best_bin_mean_ap) + "\n";
    out += "mAP unrestricted: " + fixed(report.best_concepts.mean_ap) +
           "  best viewpoint: " + fixed(vp.best_bin_mean_ap) + "\n";
    out += "images excluded (unknown viewpoint): " + std::to_string(vp.excluded_images) + "\n";
  }
  return out;
}

std::string format_ap_matrix(const EvalReport& report) {
  const auto& m = report.matrix;
  std::string out = "[provenance]\n";
  out += "match_radius=" + detail::format_double(report.options.match_radius) + "\n";
  out += "subset_max=" + std::to_string(report.options.subset_max) + "\n";
  out += "ap_mode=" + std::string(to_string(report.options.mode)) + "\n";
  if (report.viewpoint) {
    out += "viewpoint_excluded_images=" + std::to_string(report.viewpoint->excluded_images) + "\n";
  }
  for (const auto& [k, v] : report.provenance) out += k + "=" + v + "\n";

  out += "[parts]\n";
  for (const auto& p : m.parts) out += p + "\n";
  out += "[matrix]\n";
  for (std::size_t k = 0; k < m.concept_ids.size(); ++k) {
    for (std::size_t p = 0; p < m.parts.size(); ++p) {
      out += std::to_string(m.concept_ids[k]) + " " + m.parts[p] + " " + exact(m.at(k, p)) + "\n";
    }
  }
  out += "[subsets]\n";
  for (const auto& s : report.subsets) {
    out += std::to_string(s.concept_id) + " " +
           (s.parts.empty() ? std::string("-") : join_parts(s.parts, m.parts)) + " " +
           exact(s.ap) + "\n";
  }
  if (report.viewpoint) {
    for (const auto& [bin, table] : report.viewpoint->per_bin) {
      out += "[viewpoint " + std::string(to_string(bin)) + "]\n";
      for (const auto& row : table.rows) {
        out += (row.concept_id ? std::to_string(*row.concept_id) : std::string("-")) + " " +
               row.part + " " + exact(row.ap) + "\n";
      }
    }
  }
  return out;
}

EvalReport parse_ap_matrix(std::string_view text) {
  EvalReport report;
  std::string section;
  std::unordered_map<std::string, std::size_t> concept_pos;
  std::vector<std::pair<std::string, std::string>> provenance;
  std::optional<std::size_t> excluded;

  auto parse_ap = [](std::string_view field, std::size_t line) -> std::optional<double> {
    if (field == "absent") return std::nullopt;
    auto v = detail::parse_number<double>(field);
    if (!v) throw DataError("AP matrix line " + std::to_string(line) + ": bad AP '" +
                            std::string(field) + "'");
    return v;
  };
  auto parse_id = [](std::string_view field, std::size_t line) {
    auto v = detail::parse_number<uint32_t>(field);
    if (!v) throw DataError("AP matrix line " + std::to_string(line) + ": bad concept id");
    return *v;
  };
  auto part_index = [&](std::string_view name, std::size_t line) {
    const auto& parts = report.matrix.parts;
    auto it = std::find(parts.begin(), parts.end(), name);
    if (it == parts.end()) {
      throw DataError("AP matrix line " + std::to_string(line) + ": unknown part '" +
                      std::string(name) + "'");
    }
    return static_cast<uint32_t>(it - parts.begin());
  };

  detail::for_each_line(text, [&](std::size_t number, std::string_view line) {
    if (line.empty()) return;
    if (line.front() == '[') {
      section = std::string(line.substr(1, line.size() - 2));
      if (section.starts_with("viewpoint ")) {
        if (!report.viewpoint) report.viewpoint.emplace();
        report.viewpoint->per_bin.emplace_back(parse_viewpoint(section.substr(10)),
                                               BestConceptTable{});
      }
      return;
    }
    if (section == "provenance") {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw DataError("AP matrix line " + std::to_string(number) + ": expected key=value");
      std::string key(line.substr(0, eq));
      std::string value(line.substr(eq + 1));
      if (key == "match_radius") {
        report.options.match_radius = detail::parse_number<double>(value).value_or(kDefaultMatchRadius);
      } else if (key == "subset_max") {
        report.options.subset_max = detail::parse_number<std::size_t>(value).value_or(kDefaultSubsetMax);
      } else if (key == "ap_mode") {
        report.options.mode = parse_ap_mode(value);
      } else if (key == "viewpoint_excluded_images") {
        excluded = detail::parse_number<std::size_t>(value);
      } else {
        provenance.emplace_back(std::move(key), std::move(value));
      }
      return;
    }
    if (section == "parts") {
      report.matrix.parts.emplace_back(line);
      return;
    }
    auto fields = detail::split_fields(line);
    if (fields.size() != 3) {
      throw DataError("AP matrix line " + std::to_string(number) + ": expected 3 fields");
    }
    if (section == "matrix") {
      const auto id = parse_id(fields[0], number);
      auto [it, inserted] = concept_pos.emplace(std::string(fields[0]), report.matrix.concept_ids.size());
      if (inserted) {
        report.matrix.concept_ids.push_back(id);
        report.matrix.values.resize(report.matrix.values.size() + report.matrix.parts.size());
      }
      report.matrix.values[it->second * report.matrix.parts.size() + part_index(fields[1], number)] =
          parse_ap(fields[2], number);
    } else if (section == "subsets") {
      SubsetResult s;
      s.concept_id = parse_id(fields[0], number);
      if (fields[1] != "-") {
        std::string_view rest = fields[1];
        while (!rest.empty()) {
          auto plus = rest.find('+');
          s.parts.push_back(part_index(rest.substr(0, plus), number));
          if (plus == std::string_view::npos) break;
          rest.remove_prefix(plus + 1);
        }
      }
      s.ap = parse_ap(fields[2], number);
      report.subsets.push_back(std::move(s));
    } else if (section.starts_with("viewpoint ")) {
      BestConceptRow row;
      if (fields[0] != "-") row.concept_id = parse_id(fields[0], number);
      row.part = std::string(fields[1]);
      row.ap = parse_ap(fields[2], number);
      report.viewpoint->per_bin.back().second.rows.push_back(std::move(row));
    } else {
      throw DataError("AP matrix line " + std::to_string(number) + ": outside any section");
    }
  });

  report.provenance = std::move(provenance);
  report.best_concepts = best_concept_per_part(report.matrix);
  for (auto& s : report.subsets) {
    auto it = std::find(report.matrix.concept_ids.begin(), report.matrix.concept_ids.end(),
                        s.concept_id);
    if (it == report.matrix.concept_ids.end()) continue;
    const auto k = static_cast<std::size_t>(it - report.matrix.concept_ids.begin());
    for (std::size_t p = 0; p < report.matrix.parts.size(); ++p) {
      const auto ap = report.matrix.at(k, p);
      if (ap && (!s.best_single_ap || *ap > *s.best_single_ap)) s.best_single_ap = ap;
    }
  }
  report.histograms = ap_histograms(report.subsets);
  if (report.viewpoint) {
    for (auto& [bin, table] : report.viewpoint->per_bin) table.mean_ap = mean_defined_ap(table.rows);
    report.viewpoint->excluded_images = excluded.value_or(0);
    summarize_best_bins(*report.viewpoint);
  }
  return report;
}

}  // namespace conceptforge
