#include "hqmv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hqmv::metrics {

namespace {

constexpr double kEps = 1e-7;

double clamp_p(double p) { return std::min(1.0 - kEps, std::max(kEps, p)); }

void check_grid(const std::vector<double>& grid, const char* who) {
    if (grid.empty()) throw std::invalid_argument(std::string(who) + ": empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1])
            throw std::invalid_argument(std::string(who) +
                                        ": grid must be strictly increasing");
}

std::vector<double> resolve_alpha(const PredictionSet& ps,
                                  const std::vector<double>& alpha_c) {
    if (alpha_c.empty()) return std::vector<double>(ps.C, 1.0);
    if (alpha_c.size() != ps.C)
        throw std::invalid_argument("focal_loss: alpha_c width mismatch");
    return alpha_c;
}

}  // namespace

void PredictionSet::validate() const {
    if (N == 0 || C == 0) throw std::invalid_argument("PredictionSet: empty");
    if (scores.size() != N * C || labels.size() != N * C)
        throw std::invalid_argument("PredictionSet: shape mismatch");
    for (double s : scores)
        if (!std::isfinite(s) || s < 0.0 || s > 1.0)
            throw std::invalid_argument("PredictionSet: scores must lie in [0, 1]");
}

double focal_loss(const PredictionSet& ps, double gamma,
                  const std::vector<double>& alpha_c) {
    ps.validate();
    if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
    const auto alpha = resolve_alpha(ps, alpha_c);
    double total = 0.0;
    for (std::size_t n = 0; n < ps.N; ++n)
        for (std::size_t c = 0; c < ps.C; ++c) {
            const double p = clamp_p(ps.score(n, c));
            if (ps.label(n, c))
                total += alpha[c] * std::pow(1.0 - p, gamma) * (-std::log(p));
            else
                total += std::pow(p, gamma) * (-std::log(1.0 - p));
        }
    return total / double(ps.N);
}

std::vector<double> focal_loss_grad(const PredictionSet& ps, double gamma,
                                    const std::vector<double>& alpha_c) {
    ps.validate();
    if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
    const auto alpha = resolve_alpha(ps, alpha_c);
    std::vector<double> g(ps.N * ps.C, 0.0);
    const double inv_n = 1.0 / double(ps.N);
    for (std::size_t n = 0; n < ps.N; ++n)
        for (std::size_t c = 0; c < ps.C; ++c) {
            const double raw = ps.score(n, c);
            if (raw <= kEps || raw >= 1.0 - kEps) continue;  // clamp plateau
            const double p = raw;
            double d;
            if (ps.label(n, c)) {
                d = -alpha[c] * std::pow(1.0 - p, gamma) / p;
                if (gamma > 0.0)
                    d += alpha[c] * gamma * std::pow(1.0 - p, gamma - 1.0) * std::log(p);
            } else {
                d = std::pow(p, gamma) / (1.0 - p);
                if (gamma > 0.0)
                    d += -gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p);
            }
            g[n * ps.C + c] = d * inv_n;
        }
    return g;
}

std::vector<double> per_class_f1(const PredictionSet& ps) {
    std::vector<double> f1(ps.C, -1.0);
    for (std::size_t c = 0; c < ps.C; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0, pos = 0;
        for (std::size_t n = 0; n < ps.N; ++n) {
            const bool pred = ps.score(n, c) >= 0.5;
            const bool truth = ps.label(n, c);
            pos += truth;
            if (pred && truth) ++tp;
            if (pred && !truth) ++fp;
            if (!pred && truth) ++fn;
        }
        if (pos == 0) continue;
        f1[c] = (2.0 * double(tp)) / double(2 * tp + fp + fn);
    }
    return f1;
}

double macro_f1(const PredictionSet& ps) {
    const auto f1 = per_class_f1(ps);
    double sum = 0.0;
    std::size_t k = 0;
    for (double v : f1)
        if (v >= 0.0) {
            sum += v;
            ++k;
        }
    return k ? sum / double(k) : 0.0;
}

MultilabelReport multilabel_suite(const PredictionSet& ps) {
    ps.validate();
    MultilabelReport rep;

    // mAP: all-points average precision per class, descending scores.
    double ap_sum = 0.0;
    std::size_t ap_classes = 0;
    for (std::size_t c = 0; c < ps.C; ++c) {
        std::vector<std::size_t> order(ps.N);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ps.score(a, c) > ps.score(b, c);
        });
        std::size_t n_pos = 0;
        for (std::size_t n = 0; n < ps.N; ++n) n_pos += ps.label(n, c);
        if (n_pos == 0) {
            rep.skipped_classes.push_back(c);
            continue;
        }
        double ap = 0.0;
        std::size_t cum_pos = 0;
        for (std::size_t k = 0; k < ps.N; ++k) {
            if (ps.label(order[k], c)) {
                ++cum_pos;
                ap += double(cum_pos) / double(k + 1);
            }
        }
        ap_sum += ap / double(n_pos);
        ++ap_classes;
    }
    rep.mAP = ap_classes ? ap_sum / double(ap_classes) : 0.0;

    // Hamming: bit-error fraction at threshold 0.5.
    std::size_t wrong = 0;
    for (std::size_t n = 0; n < ps.N; ++n)
        for (std::size_t c = 0; c < ps.C; ++c)
            if ((ps.score(n, c) >= 0.5) != ps.label(n, c)) ++wrong;
    rep.hamming = double(wrong) / double(ps.N * ps.C);

    // Ranking loss and coverage error per sample; ties in scores count half.
    double rank_sum = 0.0, cov_sum = 0.0;
    std::size_t rank_n = 0, cov_n = 0;
    for (std::size_t n = 0; n < ps.N; ++n) {
        std::vector<std::size_t> pos, neg;
        for (std::size_t c = 0; c < ps.C; ++c)
            (ps.label(n, c) ? pos : neg).push_back(c);
        if (!pos.empty()) {
            std::size_t worst_depth = 0;
            for (auto cp : pos) {
                std::size_t depth = 0;
                for (std::size_t c = 0; c < ps.C; ++c)
                    if (ps.score(n, c) >= ps.score(n, cp)) ++depth;
                worst_depth = std::max(worst_depth, depth);
            }
            cov_sum += double(worst_depth);
            ++cov_n;
        }
        if (!pos.empty() && !neg.empty()) {
            double bad = 0.0;
            for (auto cp : pos)
                for (auto cn : neg) {
                    if (ps.score(n, cp) < ps.score(n, cn))
                        bad += 1.0;
                    else if (ps.score(n, cp) == ps.score(n, cn))
                        bad += 0.5;
                }
            rank_sum += bad / double(pos.size() * neg.size());
            ++rank_n;
        }
    }
    rep.ranking_loss = rank_n ? rank_sum / double(rank_n) : 0.0;
    rep.coverage_error = cov_n ? cov_sum / double(cov_n) : 0.0;

    // Kendall tau-b per sample between score and label vectors.
    double tau_sum = 0.0;
    std::size_t tau_n = 0;
    for (std::size_t n = 0; n < ps.N; ++n) {
        long nc = 0, nd = 0, ties_s = 0, ties_y = 0;
        const long n0 = long(ps.C * (ps.C - 1) / 2);
        for (std::size_t i = 0; i < ps.C; ++i)
            for (std::size_t j = i + 1; j < ps.C; ++j) {
                const double ds = ps.score(n, i) - ps.score(n, j);
                const int dy = int(ps.label(n, i)) - int(ps.label(n, j));
                if (ds == 0.0) ++ties_s;
                if (dy == 0) ++ties_y;
                if (ds == 0.0 || dy == 0) continue;
                if ((ds > 0.0) == (dy > 0)) ++nc;
                else ++nd;
            }
        const double denom =
            std::sqrt(double(n0 - ties_s)) * std::sqrt(double(n0 - ties_y));
        if (denom == 0.0) continue;
        tau_sum += double(nc - nd) / denom;
        ++tau_n;
    }
    rep.kendall_tau = tau_n ? tau_sum / double(tau_n) : 0.0;

    rep.macro_f1 = macro_f1(ps);
    return rep;
}

CalibrationReport calibration_suite(const PredictionSet& ps, std::size_t n_bins) {
    ps.validate();
    if (n_bins < 2) throw std::invalid_argument("calibration_suite: n_bins must be >= 2");

    CalibrationReport rep;
    rep.bins.assign(n_bins, {});
    std::vector<double> conf_sum(n_bins, 0.0);
    std::vector<std::size_t> correct_cnt(n_bins, 0);

    const std::size_t total = ps.N * ps.C;
    double brier = 0.0, nll = 0.0, entropy = 0.0;
    std::size_t conf90_n = 0, conf90_correct = 0;
    for (std::size_t n = 0; n < ps.N; ++n)
        for (std::size_t c = 0; c < ps.C; ++c) {
            const double p = ps.score(n, c);
            const double y = ps.label(n, c) ? 1.0 : 0.0;
            const double conf = std::max(p, 1.0 - p);
            const bool correct = (p >= 0.5) == ps.label(n, c);
            std::size_t b = std::size_t(conf * double(n_bins));
            if (b >= n_bins) b = n_bins - 1;
            rep.bins[b].count++;
            conf_sum[b] += conf;
            correct_cnt[b] += correct;
            brier += (p - y) * (p - y);
            const double pc = clamp_p(p);
            nll += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
            entropy += -(pc * std::log(pc) + (1.0 - pc) * std::log(1.0 - pc));
            if (conf >= 0.9) {
                ++conf90_n;
                conf90_correct += correct;
            }
        }

    for (std::size_t b = 0; b < n_bins; ++b) {
        if (rep.bins[b].count == 0) continue;
        rep.bins[b].mean_conf = conf_sum[b] / double(rep.bins[b].count);
        rep.bins[b].accuracy = double(correct_cnt[b]) / double(rep.bins[b].count);
        const double gap = std::fabs(rep.bins[b].accuracy - rep.bins[b].mean_conf);
        rep.ece += double(rep.bins[b].count) / double(total) * gap;
        rep.mce = std::max(rep.mce, gap);
    }
    rep.brier = brier / double(total);
    rep.nll = nll / double(total);
    rep.mean_entropy = entropy / double(total);
    rep.acc_at_conf90 = conf90_n ? double(conf90_correct) / double(conf90_n) : 0.0;

    std::size_t ambiguous = 0;
    for (std::size_t n = 0; n < ps.N; ++n) {
        bool any = false;
        for (std::size_t c = 0; c < ps.C; ++c) {
            const double p = ps.score(n, c);
            if (p >= 0.4 && p <= 0.6) any = true;
        }
        ambiguous += any;
    }
    rep.ambiguous_frac = double(ambiguous) / double(ps.N);
    return rep;
}

std::vector<ComplexityRow> complexity_breakdown(
    const PredictionSet& ps, const std::vector<std::size_t>& defect_counts) {
    ps.validate();
    if (defect_counts.size() != ps.N)
        throw std::invalid_argument("complexity_breakdown: counts misaligned");
    std::vector<ComplexityRow> rows;
    for (std::size_t k = 1; k <= 4; ++k) {
        ComplexityRow row;
        row.n_defects = k;
        std::size_t exact = 0, bit_errors = 0;
        for (std::size_t n = 0; n < ps.N; ++n) {
            if (defect_counts[n] != k) continue;
            ++row.n_samples;
            std::size_t wrong = 0;
            for (std::size_t c = 0; c < ps.C; ++c)
                if ((ps.score(n, c) >= 0.5) != ps.label(n, c)) ++wrong;
            bit_errors += wrong;
            exact += (wrong == 0);
        }
        if (row.n_samples) {
            row.subset_accuracy = double(exact) / double(row.n_samples);
            row.mean_bit_errors = double(bit_errors) / double(row.n_samples);
        }
        rows.push_back(row);
    }
    return rows;
}

RiskCurve selective_prediction(const PredictionSet& ps,
                               const std::vector<double>& coverage_grid) {
    ps.validate();
    check_grid(coverage_grid, "selective_prediction");
    for (double q : coverage_grid)
        if (q <= 0.0 || q > 1.0)
            throw std::invalid_argument("selective_prediction: coverage must be in (0, 1]");

    // Sample confidence: the least confident label decision.
    std::vector<double> conf(ps.N);
    for (std::size_t n = 0; n < ps.N; ++n) {
        double m = 1.0;
        for (std::size_t c = 0; c < ps.C; ++c) {
            const double p = ps.score(n, c);
            m = std::min(m, std::max(p, 1.0 - p));
        }
        conf[n] = m;
    }
    std::vector<std::size_t> order(ps.N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });

    RiskCurve curve;
    curve.x_name = "coverage";
    curve.y_name = "macro_f1";
    for (double q : coverage_grid) {
        const std::size_t keep = std::size_t(std::ceil(q * double(ps.N)));
        if (keep == 0) throw std::invalid_argument("selective_prediction: empty retention");
        PredictionSet sub;
        sub.N = keep;
        sub.C = ps.C;
        sub.class_names = ps.class_names;
        for (std::size_t i = 0; i < keep; ++i) {
            const std::size_t n = order[i];
            for (std::size_t c = 0; c < ps.C; ++c) {
                sub.scores.push_back(ps.score(n, c));
                sub.labels.push_back(ps.label(n, c));
            }
        }
        curve.x.push_back(q);
        curve.y.push_back(macro_f1(sub));
    }
    return curve;
}

RiskCurve catastrophic_miss_rate(const PredictionSet& ps, std::size_t critical_class,
                                 const std::vector<double>& threshold_grid) {
    ps.validate();
    check_grid(threshold_grid, "catastrophic_miss_rate");
    if (critical_class >= ps.C)
        throw std::invalid_argument("catastrophic_miss_rate: class out of range");
    std::vector<double> positives;
    for (std::size_t n = 0; n < ps.N; ++n)
        if (ps.label(n, critical_class))
            positives.push_back(ps.score(n, critical_class));
    if (positives.empty())
        throw std::invalid_argument("catastrophic_miss_rate: no positives for class");

    RiskCurve curve;
    curve.x_name = "threshold";
    curve.y_name = "miss_rate";
    for (double t : threshold_grid) {
        std::size_t missed = 0;
        for (double s : positives) missed += (s < t);
        curve.x.push_back(t);
        curve.y.push_back(double(missed) / double(positives.size()));
    }
    return curve;
}

RiskCurve expected_fp_cost(const PredictionSet& ps, double cost_per_fp,
                           const std::vector<double>& threshold_grid) {
    ps.validate();
    check_grid(threshold_grid, "expected_fp_cost");
    if (cost_per_fp < 0.0)
        throw std::invalid_argument("expected_fp_cost: cost must be >= 0");
    RiskCurve curve;
    curve.x_name = "threshold";
    curve.y_name = "cost_per_wafer";
    for (double t : threshold_grid) {
        std::size_t fp = 0;
        for (std::size_t n = 0; n < ps.N; ++n)
            for (std::size_t c = 0; c < ps.C; ++c)
                if (ps.score(n, c) >= t && !ps.label(n, c)) ++fp;
        curve.x.push_back(t);
        curve.y.push_back(double(fp) * cost_per_fp / double(ps.N));
    }
    return curve;
}

}  // namespace hqmv::metrics
