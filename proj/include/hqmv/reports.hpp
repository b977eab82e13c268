#pragma once

#include <string>
#include <vector>

#include "hqmv/metrics.hpp"

namespace hqmv::reports {

// Header row plus string cells; the caller owns formatting.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_curve_csv(const std::string& path, const metrics::RiskCurve& curve);

// Minimal static line chart; byte format unversioned plumbing.
void write_curve_svg(const std::string& path, const metrics::RiskCurve& curve);

void write_multilabel_csv(const std::string& path, const metrics::MultilabelReport& rep);
void write_calibration_csv(const std::string& path, const metrics::CalibrationReport& rep);
void write_bins_csv(const std::string& path, const metrics::CalibrationReport& rep);

std::string fmt(double v);

}  // namespace hqmv::reports
