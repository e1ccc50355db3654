#pragma once

#include <string>
#include <string_view>

#include "conceptforge/evaluation.hpp"

namespace conceptforge {

/// Human-readable tables: best concept per part with mAP, SingleSP and
/// MultipleSP histograms, subset-size distribution, viewpoint tables.
std::string format_report_text(const EvalReport& report);

/// Machine-readable form. Sections `[matrix]`, `[subsets]` and
/// `[viewpoint <bin>]`, each row `concept_id part_or_subset ap` where subsets
/// are '+'-joined part ids and undefined APs are written `absent`.
std::string format_ap_matrix(const EvalReport& report);

/// Rebuilds the report content that the machine-readable form carries
/// (matrix, best concepts, subsets, histograms, viewpoint tables).
EvalReport parse_ap_matrix(std::string_view text);

}  // namespace conceptforge
