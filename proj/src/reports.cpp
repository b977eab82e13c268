#include "hqmv/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hqmv::reports {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    return out;
}

}  // namespace

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    auto out = open_out(path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

void write_curve_csv(const std::string& path, const metrics::RiskCurve& curve) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < curve.x.size(); ++i)
        rows.push_back({fmt(curve.x[i]), fmt(curve.y[i])});
    write_csv(path, {curve.x_name, curve.y_name}, rows);
}

void write_curve_svg(const std::string& path, const metrics::RiskCurve& curve) {
    const double W = 480, H = 320, m = 48;
    double x_lo = curve.x.front(), x_hi = curve.x.back();
    double y_lo = curve.y.front(), y_hi = curve.y.front();
    for (double v : curve.y) {
        y_lo = std::min(y_lo, v);
        y_hi = std::max(y_hi, v);
    }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    auto px = [&](double x) { return m + (x - x_lo) / (x_hi - x_lo) * (W - 2 * m); };
    auto py = [&](double y) { return H - m - (y - y_lo) / (y_hi - y_lo) * (H - 2 * m); };

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m
        << "\" y2=\"" << H - m << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\""
        << H - m << "\" stroke=\"black\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curve.x.size(); ++i)
        out << fmt(px(curve.x[i])) << "," << fmt(py(curve.y[i])) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << curve.x_name << "</text>\n";
    out << "<text x=\"14\" y=\"" << H / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
        << H / 2 << ")\">" << curve.y_name << "</text>\n";
    out << "<text x=\"" << m << "\" y=\"" << H - m + 16 << "\" font-size=\"10\">"
        << fmt(x_lo) << "</text>\n";
    out << "<text x=\"" << W - m << "\" y=\"" << H - m + 16
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(x_hi) << "</text>\n";
    out << "<text x=\"" << m - 4 << "\" y=\"" << H - m
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(y_lo) << "</text>\n";
    out << "<text x=\"" << m - 4 << "\" y=\"" << m + 4
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(y_hi) << "</text>\n";
    out << "</svg>\n";
}

void write_multilabel_csv(const std::string& path,
                          const metrics::MultilabelReport& rep) {
    write_csv(path,
              {"mAP", "hamming", "ranking_loss", "coverage_error", "kendall_tau",
               "macro_f1"},
              {{fmt(rep.mAP), fmt(rep.hamming), fmt(rep.ranking_loss),
                fmt(rep.coverage_error), fmt(rep.kendall_tau), fmt(rep.macro_f1)}});
}

void write_calibration_csv(const std::string& path,
                           const metrics::CalibrationReport& rep) {
    write_csv(path,
              {"ece", "mce", "brier", "nll", "acc_at_conf90", "mean_entropy",
               "ambiguous_frac"},
              {{fmt(rep.ece), fmt(rep.mce), fmt(rep.brier), fmt(rep.nll),
                fmt(rep.acc_at_conf90), fmt(rep.mean_entropy),
                fmt(rep.ambiguous_frac)}});
}

void write_bins_csv(const std::string& path, const metrics::CalibrationReport& rep) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t b = 0; b < rep.bins.size(); ++b)
        rows.push_back({std::to_string(b), std::to_string(rep.bins[b].count),
                        fmt(rep.bins[b].mean_conf), fmt(rep.bins[b].accuracy)});
    write_csv(path, {"bin", "count", "mean_confidence", "accuracy"}, rows);
}

}  // namespace hqmv::reports
