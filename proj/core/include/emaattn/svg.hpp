#pragma once

// Standalone SVG renderings of the explanation artifacts. Layouts are fixed
// so identical inputs produce identical documents.

#include "emaattn/explain.hpp"

#include <string>
#include <vector>

namespace emaattn {

// One bar group per cluster, one bar per feature. Throws Errc::empty_artifact.
std::string render_correlation_bars(const std::vector<CorrelationProfile>& profiles,
                                    const std::vector<std::string>& feature_names);

// V x V grid, cell text = value to 2 decimals, x-axis = contributing feature.
std::string render_heatmap(const FeatureAttentionHeatmap& heatmap, const std::vector<std::string>& feature_names);

// Mean feature value (x) against mean attention (y); one <circle> per record,
// coloured by true cluster with a legend entry per cluster.
std::string render_scatter(const std::vector<AttentionFeatureRecord>& records, const std::string& feature_name);

// Per feature: value (x) against time-point weight (y) for one individual.
std::string render_summary(const IndividualSummary& summary, const std::vector<std::string>& feature_names);

}  // namespace emaattn
