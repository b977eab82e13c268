#pragma once

#include <string>
#include <vector>

#include "hqmv/metrics.hpp"
#include "hqmv/model.hpp"
#include "hqmv/numcore.hpp"
#include "hqmv/wafer.hpp"

namespace hqmv::harness {

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double lr = 3e-3;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double gamma = 2.0;  // focal loss exponent
    std::uint64_t seed = 42;
    bool deterministic = true;
};

struct TrainHistory {
    std::vector<double> train_loss, val_loss, val_macro_f1, wall_time;
};

struct SplitDataset {
    std::vector<wafer::WaferSample> train, val, test;
};

// Seeded shuffle then slice; requested counts shrink proportionally when the
// dataset is smaller than their sum.
SplitDataset split_dataset(const std::vector<wafer::WaferSample>& samples,
                           std::uint64_t seed, std::size_t n_train = 3000,
                           std::size_t n_val = 600, std::size_t n_test = 600);

TrainHistory train(Model& model, const std::vector<wafer::WaferSample>& train_set,
                   const std::vector<wafer::WaferSample>& val_set,
                   const TrainConfig& tc);

// Sigmoid scores per class, no thresholding; HQMV_THREADS caps eval workers.
metrics::PredictionSet evaluate(const Model& model,
                                const std::vector<wafer::WaferSample>& set);

double dataset_loss(const Model& model, const std::vector<wafer::WaferSample>& set,
                    double gamma);

// Every per-sample report input needed by the risk suites.
std::vector<std::size_t> defect_counts(const std::vector<wafer::WaferSample>& set);

void write_eval_reports(const Model& model, const std::vector<wafer::WaferSample>& set,
                        const std::string& report_dir);

void write_risk_reports(const Model& model, const std::vector<wafer::WaferSample>& set,
                        std::size_t critical_class, double fp_cost,
                        const std::string& report_dir, const std::string& prefix = "");

// Trains classical and hybrid twins from identical seeds and emits the full
// paired report set, including per-class gate activations for the hybrid.
void ablation_run(const std::vector<wafer::WaferSample>& dataset,
                  const ModelConfig& cfg, const TrainConfig& tc,
                  const std::string& report_dir);

// Finite-difference check of every trainable parameter of a model against the
// analytic backward, via a focal-loss objective over a small batch.
std::vector<GradReport> model_grad_check(Model& model,
                                         const std::vector<wafer::WaferSample>& batch,
                                         double gamma, double eps = 1e-3);

}  // namespace hqmv::harness
