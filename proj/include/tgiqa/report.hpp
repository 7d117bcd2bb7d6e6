#pragma once

// Report artifacts: SVG plots and the predictability JSON document.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgiqa/predictability.hpp"
#include "tgiqa/stats.hpp"

namespace tgiqa {

/// Group-mean accuracy against group-mean quality. Exactly one <circle> per
/// group; legend swatches are <rect> elements coloured by corruption.
std::string scatter_svg(std::span<const GroupSummary> groups, const std::string& x_label,
                        const std::string& y_label);

struct LinePoint {
    double x = 0.0;
    double y = 0.0;
    double lo = 0.0;  // error bar; equal to y when absent
    double hi = 0.0;
};

std::string line_chart_svg(std::span<const LinePoint> points, const std::string& x_label, const std::string& y_label);

struct PredictabilitySummary {
    std::string metric;
    std::string model;
    PointwiseResult pointwise;
    std::optional<LabelPredictability> per_label;
    std::optional<ImageKFoldResult> per_image;
};

/// {metric, model, auc, auc_ci, ce, ce_ci, mauc, mauc_sigma, skipped, ...}
std::string predictability_json(std::span<const PredictabilitySummary> rows);

/// Escapes &, <, >, " for SVG text and attributes.
std::string xml_escape(const std::string& s);

}  // namespace tgiqa
