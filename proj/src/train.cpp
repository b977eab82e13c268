#include "hqmv/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "hqmv/activations.hpp"
#include "hqmv/reports.hpp"

namespace hqmv::harness {

namespace {

std::size_t eval_thread_cap() {
    const char* env = std::getenv("HQMV_THREADS");
    if (!env) return 1;
    const long v = std::atol(env);
    return v < 1 ? 1 : std::size_t(v);
}

metrics::PredictionSet make_prediction_set(std::size_t n) {
    metrics::PredictionSet ps;
    ps.N = n;
    ps.C = wafer::kNumClasses;
    ps.scores.assign(n * ps.C, 0.0);
    ps.labels.assign(n * ps.C, 0);
    ps.class_names.assign(wafer::kClassNames.begin(), wafer::kClassNames.end());
    return ps;
}

void fill_labels(metrics::PredictionSet& ps,
                 const std::vector<wafer::WaferSample>& set) {
    for (std::size_t n = 0; n < set.size(); ++n)
        for (std::size_t c = 0; c < ps.C; ++c)
            ps.labels[n * ps.C + c] = set[n].label[c];
}

struct Adam {
    double beta1, beta2, eps;
    std::vector<double> m, v;
    std::size_t t = 0;

    Adam(std::size_t n, const TrainConfig& tc)
        : beta1(tc.beta1), beta2(tc.beta2), eps(tc.adam_eps), m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<ParamRef>& refs, const std::vector<double>& grad,
              double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, double(t));
        const double bc2 = 1.0 - std::pow(beta2, double(t));
        std::size_t off = 0;
        for (auto& r : refs) {
            if (r.trainable) {
                for (std::size_t i = 0; i < r.n; ++i) {
                    const double g = grad[off + i];
                    m[off + i] = beta1 * m[off + i] + (1.0 - beta1) * g;
                    v[off + i] = beta2 * v[off + i] + (1.0 - beta2) * g * g;
                    r.p[i] -= lr * (m[off + i] / bc1) /
                              (std::sqrt(v[off + i] / bc2) + eps);
                }
            }
            off += r.n;
        }
    }
};

// dLoss/dlogit for one sample inside a batch-of-B mean focal loss.
std::vector<double> logit_grad_for_sample(const std::vector<double>& scores,
                                          const std::array<std::uint8_t, 8>& label,
                                          double gamma, std::size_t batch_n) {
    metrics::PredictionSet one = make_prediction_set(1);
    one.scores = scores;
    for (std::size_t c = 0; c < one.C; ++c) one.labels[c] = label[c];
    const auto gscore = metrics::focal_loss_grad(one, gamma);
    std::vector<double> glogit(one.C, 0.0);
    for (std::size_t c = 0; c < one.C; ++c) {
        const double s = scores[c];
        glogit[c] = gscore[c] * s * (1.0 - s) / double(batch_n);
    }
    return glogit;
}

}  // namespace

SplitDataset split_dataset(const std::vector<wafer::WaferSample>& samples,
                           std::uint64_t seed, std::size_t n_train,
                           std::size_t n_val, std::size_t n_test) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(seed, 0x53504c49ULL);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);

    const std::size_t want = n_train + n_val + n_test;
    if (samples.size() < want) {
        const double scale = double(samples.size()) / double(want);
        n_train = std::size_t(double(n_train) * scale);
        n_val = std::size_t(double(n_val) * scale);
        n_test = samples.size() - n_train - n_val;
    }
    SplitDataset out;
    std::size_t i = 0;
    for (; i < n_train; ++i) out.train.push_back(samples[order[i]]);
    for (; i < n_train + n_val; ++i) out.val.push_back(samples[order[i]]);
    for (; i < n_train + n_val + n_test; ++i) out.test.push_back(samples[order[i]]);
    return out;
}

metrics::PredictionSet evaluate(const Model& model,
                                const std::vector<wafer::WaferSample>& set) {
    if (set.empty()) throw std::invalid_argument("evaluate: empty set");
    metrics::PredictionSet ps = make_prediction_set(set.size());
    fill_labels(ps, set);

    const std::size_t n_threads = std::min(eval_thread_cap(), set.size());
    auto run = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = lo; n < hi; ++n) {
            const auto scores = model.forward(set[n]);
            std::copy(scores.begin(), scores.end(), ps.scores.begin() + long(n * ps.C));
        }
    };
    if (n_threads <= 1) {
        run(0, set.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (set.size() + n_threads - 1) / n_threads;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back(run, t * chunk, std::min(set.size(), (t + 1) * chunk));
        for (auto& th : pool) th.join();
    }
    return ps;
}

double dataset_loss(const Model& model, const std::vector<wafer::WaferSample>& set,
                    double gamma) {
    const auto ps = evaluate(model, set);
    return metrics::focal_loss(ps, gamma);
}

TrainHistory train(Model& model, const std::vector<wafer::WaferSample>& train_set,
                   const std::vector<wafer::WaferSample>& val_set,
                   const TrainConfig& tc) {
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("train: empty dataset");
    if (tc.lr < 0.0 || tc.batch_size < 1)
        throw std::invalid_argument("train: invalid config");

    auto refs = model.param_refs();
    std::size_t total = 0;
    for (const auto& r : refs) total += r.n;
    Adam opt(total, tc);
    ModelGrads grads;
    grads.flat.assign(total, 0.0);

    TrainHistory hist;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = Rng::derive(tc.seed, 500 + epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t loss_n = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t end = std::min(order.size(), start + tc.batch_size);
            const std::size_t bn = end - start;
            grads.reset();
            metrics::PredictionSet batch_ps = make_prediction_set(bn);
            for (std::size_t k = 0; k < bn; ++k) {
                const auto& sample = train_set[order[start + k]];
                SampleCache cache;
                const auto scores = model.forward(sample, &cache);
                std::copy(scores.begin(), scores.end(),
                          batch_ps.scores.begin() + long(k * batch_ps.C));
                for (std::size_t c = 0; c < batch_ps.C; ++c)
                    batch_ps.labels[k * batch_ps.C + c] = sample.label[c];
                const auto glogits =
                    logit_grad_for_sample(scores, sample.label, tc.gamma, bn);
                model.backward(cache, glogits, grads);
            }
            const double batch_loss = metrics::focal_loss(batch_ps, tc.gamma);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch));
            loss_sum += batch_loss * double(bn);
            loss_n += bn;
            if (tc.lr > 0.0) opt.step(refs, grads.flat, tc.lr);
        }

        hist.train_loss.push_back(loss_sum / double(loss_n));
        const auto val_ps = evaluate(model, val_set);
        hist.val_loss.push_back(metrics::focal_loss(val_ps, tc.gamma));
        hist.val_macro_f1.push_back(metrics::macro_f1(val_ps));
        hist.wall_time.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count());
    }
    return hist;
}

std::vector<std::size_t> defect_counts(const std::vector<wafer::WaferSample>& set) {
    std::vector<std::size_t> counts;
    counts.reserve(set.size());
    for (const auto& s : set) {
        std::size_t k = 0;
        for (auto b : s.label) k += b;
        counts.push_back(k);
    }
    return counts;
}

void write_eval_reports(const Model& model, const std::vector<wafer::WaferSample>& set,
                        const std::string& report_dir) {
    const auto ps = evaluate(model, set);
    reports::write_multilabel_csv(report_dir + "/multilabel.csv",
                                  metrics::multilabel_suite(ps));
    const auto cal = metrics::calibration_suite(ps);
    reports::write_calibration_csv(report_dir + "/calibration.csv", cal);
    reports::write_bins_csv(report_dir + "/bins.csv", cal);
}

void write_risk_reports(const Model& model, const std::vector<wafer::WaferSample>& set,
                        std::size_t critical_class, double fp_cost,
                        const std::string& report_dir, const std::string& prefix) {
    const auto ps = evaluate(model, set);

    std::vector<double> coverage, thresholds;
    for (int i = 1; i <= 20; ++i) coverage.push_back(double(i) / 20.0);
    for (int i = 0; i <= 20; ++i) thresholds.push_back(0.025 + double(i) * 0.0475);

    const auto sel = metrics::selective_prediction(ps, coverage);
    reports::write_curve_csv(report_dir + "/" + prefix + "selective.csv", sel);
    reports::write_curve_svg(report_dir + "/" + prefix + "selective.svg", sel);

    const auto miss = metrics::catastrophic_miss_rate(ps, critical_class, thresholds);
    reports::write_curve_csv(report_dir + "/" + prefix + "miss_rate.csv", miss);
    reports::write_curve_svg(report_dir + "/" + prefix + "miss_rate.svg", miss);

    const auto cost = metrics::expected_fp_cost(ps, fp_cost, thresholds);
    reports::write_curve_csv(report_dir + "/" + prefix + "fp_cost.csv", cost);
    reports::write_curve_svg(report_dir + "/" + prefix + "fp_cost.svg", cost);
}

namespace {

void write_complexity_csv(const std::string& path, const metrics::PredictionSet& ps,
                          const std::vector<std::size_t>& counts) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : metrics::complexity_breakdown(ps, counts))
        rows.push_back({std::to_string(row.n_defects), std::to_string(row.n_samples),
                        reports::fmt(row.subset_accuracy),
                        reports::fmt(row.mean_bit_errors)});
    reports::write_csv(path, {"n_defects", "n_samples", "subset_accuracy",
                              "mean_bit_errors"}, rows);
}

void write_history_csv(const std::string& path, const TrainHistory& hist) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
        rows.push_back({std::to_string(e), reports::fmt(hist.train_loss[e]),
                        reports::fmt(hist.val_loss[e]),
                        reports::fmt(hist.val_macro_f1[e]),
                        reports::fmt(hist.wall_time[e])});
    reports::write_csv(path, {"epoch", "train_loss", "val_loss", "val_macro_f1",
                              "wall_time_s"}, rows);
}

}  // namespace

void ablation_run(const std::vector<wafer::WaferSample>& dataset,
                  const ModelConfig& cfg, const TrainConfig& tc,
                  const std::string& report_dir) {
    const SplitDataset split = split_dataset(dataset, tc.seed);

    for (const bool hybrid : {false, true}) {
        ModelConfig mc = cfg;
        mc.use_qca = hybrid;
        Model model = Model::build(mc, tc.seed);
        const TrainHistory hist = train(model, split.train, split.val, tc);
        const std::string prefix = hybrid ? "hybrid_" : "classical_";

        write_history_csv(report_dir + "/" + prefix + "history.csv", hist);
        const auto ps = evaluate(model, split.test);
        reports::write_multilabel_csv(report_dir + "/" + prefix + "multilabel.csv",
                                      metrics::multilabel_suite(ps));
        const auto cal = metrics::calibration_suite(ps);
        reports::write_calibration_csv(report_dir + "/" + prefix + "calibration.csv",
                                       cal);
        reports::write_bins_csv(report_dir + "/" + prefix + "bins.csv", cal);
        write_complexity_csv(report_dir + "/" + prefix + "complexity.csv", ps,
                             defect_counts(split.test));
        write_risk_reports(model, split.test,
                           std::size_t(wafer::Defect::NearFull), 1.0, report_dir,
                           prefix);

        if (hybrid) {
            // Per-class mean |lambda*G| over test samples carrying the class.
            std::vector<double> sums(wafer::kNumClasses, 0.0);
            std::vector<std::size_t> counts(wafer::kNumClasses, 0);
            for (const auto& s : split.test) {
                const double act = model.gate_activation_mean(s);
                for (std::size_t c = 0; c < wafer::kNumClasses; ++c)
                    if (s.label[c]) {
                        sums[c] += act;
                        ++counts[c];
                    }
            }
            std::vector<std::vector<std::string>> rows;
            for (std::size_t c = 0; c < wafer::kNumClasses; ++c)
                rows.push_back({wafer::kClassNames[c],
                                reports::fmt(counts[c] ? sums[c] / double(counts[c])
                                                       : 0.0),
                                std::to_string(counts[c])});
            reports::write_csv(report_dir + "/gate_activation.csv",
                               {"class", "mean_gate_activation", "n_samples"}, rows);
        }
    }
}

std::vector<GradReport> model_grad_check(Model& model,
                                         const std::vector<wafer::WaferSample>& batch,
                                         double gamma, double eps) {
    auto refs = model.param_refs();
    std::size_t total = 0;
    for (const auto& r : refs) total += r.n;

    ModelGrads grads;
    grads.flat.assign(total, 0.0);
    metrics::PredictionSet ps = make_prediction_set(batch.size());
    fill_labels(ps, batch);
    std::vector<SampleCache> caches(batch.size());
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto scores = model.forward(batch[n], &caches[n]);
        std::copy(scores.begin(), scores.end(), ps.scores.begin() + long(n * ps.C));
    }
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto glogits = logit_grad_for_sample(caches[n].scores, batch[n].label,
                                                   gamma, batch.size());
        model.backward(caches[n], glogits, grads);
    }

    auto loss_fn = [&]() {
        const auto eval_ps = evaluate(model, batch);
        return metrics::focal_loss(eval_ps, gamma);
    };

    std::vector<ParamView> views;
    std::size_t off = 0;
    for (auto& r : refs) {
        if (r.trainable)
            views.push_back({r.name, r.p, grads.flat.data() + off, r.n});
        off += r.n;
    }
    return grad_check(loss_fn, views, eps);
}

}  // namespace hqmv::harness
