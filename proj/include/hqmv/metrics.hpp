#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hqmv::metrics {

// N x C score matrix with matching ground-truth bits; input to every metric.
struct PredictionSet {
    std::size_t N = 0, C = 0;
    std::vector<double> scores;     // N x C, probabilities in [0, 1]
    std::vector<std::uint8_t> labels;  // N x C bits
    std::vector<std::string> class_names;

    double score(std::size_t n, std::size_t c) const { return scores[n * C + c]; }
    bool label(std::size_t n, std::size_t c) const { return labels[n * C + c] != 0; }
    void validate() const;
};

// Symmetric binary focal loss per label decision, averaged over samples.
// alpha_c weights the positive term per class; empty means 1 everywhere.
// gamma = 0 with unit alpha reduces to plain binary cross-entropy.
double focal_loss(const PredictionSet& ps, double gamma,
                  const std::vector<double>& alpha_c = {});

// d loss / d score, same layout as ps.scores.
std::vector<double> focal_loss_grad(const PredictionSet& ps, double gamma,
                                    const std::vector<double>& alpha_c = {});

struct MultilabelReport {
    double mAP = 0.0;
    double hamming = 0.0;
    double ranking_loss = 0.0;
    double coverage_error = 0.0;
    double kendall_tau = 0.0;
    double macro_f1 = 0.0;
    std::vector<std::size_t> skipped_classes;  // no positives, excluded from mAP
};
MultilabelReport multilabel_suite(const PredictionSet& ps);

// Per-class F1 at threshold 0.5; classes without positives report -1.
std::vector<double> per_class_f1(const PredictionSet& ps);
double macro_f1(const PredictionSet& ps);

struct CalibrationBin {
    std::size_t count = 0;
    double mean_conf = 0.0;
    double accuracy = 0.0;
};

struct CalibrationReport {
    double ece = 0.0, mce = 0.0, brier = 0.0, nll = 0.0;
    double acc_at_conf90 = 0.0;
    double mean_entropy = 0.0;    // nats
    double ambiguous_frac = 0.0;  // samples with any score in [0.4, 0.6]
    std::vector<CalibrationBin> bins;
};
CalibrationReport calibration_suite(const PredictionSet& ps, std::size_t n_bins = 15);

struct ComplexityRow {
    std::size_t n_defects = 0;
    std::size_t n_samples = 0;
    double subset_accuracy = 0.0;
    double mean_bit_errors = 0.0;
};
std::vector<ComplexityRow> complexity_breakdown(
    const PredictionSet& ps, const std::vector<std::size_t>& defect_counts);

struct RiskCurve {
    std::string x_name, y_name;
    std::vector<double> x;  // strictly increasing grid
    std::vector<double> y;
};

// Macro-F1 over the most confident q-fraction of samples, per coverage point.
RiskCurve selective_prediction(const PredictionSet& ps,
                               const std::vector<double>& coverage_grid);

// Fraction of the critical class's true positives scored below each threshold.
RiskCurve catastrophic_miss_rate(const PredictionSet& ps, std::size_t critical_class,
                                 const std::vector<double>& threshold_grid);

// (false-positive decisions at threshold t) * cost / N wafers.
RiskCurve expected_fp_cost(const PredictionSet& ps, double cost_per_fp,
                           const std::vector<double>& threshold_grid);

}  // namespace hqmv::metrics
