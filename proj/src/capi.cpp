#include "hqmv.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hqmv/model.hpp"
#include "hqmv/train.hpp"
#include "hqmv/wafer.hpp"

using namespace hqmv;

struct hqmv_dataset {
    std::vector<wafer::WaferSample> samples;
};

struct hqmv_model {
    harness::Model model;
};

namespace {

thread_local std::string g_last_error;

int set_error(const std::exception& e, int code) {
    g_last_error = e.what();
    return code;
}

template <typename F>
int guard(F&& fn) {
    try {
        fn();
        g_last_error.clear();
        return HQMV_OK;
    } catch (const std::invalid_argument& e) {
        return set_error(e, HQMV_ERR_INVALID_ARGUMENT);
    } catch (const std::ios_base::failure& e) {
        return set_error(e, HQMV_ERR_IO);
    } catch (const std::exception& e) {
        return set_error(e, HQMV_ERR_RUNTIME);
    }
}

template <typename T, typename F>
T* guard_new(F&& fn) {
    try {
        T* out = fn();
        g_last_error.clear();
        return out;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return nullptr;
    }
}

harness::ModelConfig to_config(const hqmv_model_config* cfg) {
    harness::ModelConfig mc;
    if (!cfg) return mc;
    mc.H = cfg->height;
    mc.W = cfg->width;
    mc.patch = cfg->patch;
    mc.D = cfg->d_model;
    mc.n_blocks = cfg->n_blocks;
    mc.N = cfg->state_dim;
    mc.use_qca = cfg->use_qca != 0;
    mc.n_qubits = cfg->n_qubits;
    mc.qca_layers = cfg->qca_layers;
    mc.use_lora = cfg->use_lora != 0;
    mc.lora_rank = cfg->lora_rank;
    mc.lora_alpha = cfg->lora_alpha;
    return mc;
}

harness::TrainConfig to_train_config(const hqmv_train_config* tc) {
    harness::TrainConfig out;
    if (!tc) return out;
    out.epochs = tc->epochs;
    out.batch_size = tc->batch_size;
    out.lr = tc->learning_rate;
    out.gamma = tc->focal_gamma;
    out.seed = tc->seed;
    out.deterministic = tc->deterministic != 0;
    return out;
}

wafer::DatasetConfig parse_profile_csv(const std::string& path, std::uint64_t seed,
                                       std::uint16_t H, std::uint16_t W) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile: " + path);
    wafer::DatasetConfig cfg;
    cfg.H = H;
    cfg.W = W;
    cfg.seed = seed;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("profile: expected 'count,Class|Class': " + line);
        const std::size_t count = std::stoul(line.substr(0, comma));
        std::vector<wafer::Defect> kinds;
        std::stringstream names(line.substr(comma + 1));
        std::string name;
        while (std::getline(names, name, '|')) {
            const int idx = wafer::class_index(name);
            if (idx < 0) throw std::invalid_argument("profile: unknown class " + name);
            kinds.push_back(wafer::Defect(idx));
        }
        cfg.counts.push_back({kinds, count});
    }
    return cfg;
}

}  // namespace

extern "C" {

const char* hqmv_last_error(void) { return g_last_error.c_str(); }

void hqmv_model_config_default(hqmv_model_config* cfg) {
    const harness::ModelConfig mc;
    cfg->height = mc.H;
    cfg->width = mc.W;
    cfg->patch = uint32_t(mc.patch);
    cfg->d_model = uint32_t(mc.D);
    cfg->n_blocks = uint32_t(mc.n_blocks);
    cfg->state_dim = uint32_t(mc.N);
    cfg->use_qca = mc.use_qca ? 1 : 0;
    cfg->n_qubits = uint32_t(mc.n_qubits);
    cfg->qca_layers = uint32_t(mc.qca_layers);
    cfg->use_lora = mc.use_lora ? 1 : 0;
    cfg->lora_rank = uint32_t(mc.lora_rank);
    cfg->lora_alpha = mc.lora_alpha;
}

void hqmv_train_config_default(hqmv_train_config* cfg) {
    const harness::TrainConfig tc;
    cfg->epochs = uint32_t(tc.epochs);
    cfg->batch_size = uint32_t(tc.batch_size);
    cfg->learning_rate = tc.lr;
    cfg->focal_gamma = tc.gamma;
    cfg->seed = tc.seed;
    cfg->deterministic = tc.deterministic ? 1 : 0;
}

hqmv_dataset* hqmv_dataset_generate(uint64_t seed, uint16_t height, uint16_t width,
                                    const char* profile_csv) {
    return guard_new<hqmv_dataset>([&] {
        const auto cfg = profile_csv
                             ? parse_profile_csv(profile_csv, seed, height, width)
                             : wafer::DatasetConfig::default_profile(seed, height, width);
        auto* ds = new hqmv_dataset;
        ds->samples = wafer::generate_dataset(cfg);
        return ds;
    });
}

hqmv_dataset* hqmv_dataset_load(const char* path) {
    return guard_new<hqmv_dataset>([&] {
        const std::string p = path;
        auto* ds = new hqmv_dataset;
        if (p.size() >= 4 && p.compare(p.size() - 4, 4, ".wfr") == 0)
            ds->samples = wafer::load_native(p);
        else
            ds->samples = wafer::load_archive(p);
        return ds;
    });
}

int hqmv_dataset_save(const hqmv_dataset* ds, const char* path) {
    return guard([&] { wafer::save_native(path, ds->samples); });
}

int hqmv_dataset_export_manifest(const hqmv_dataset* ds, const char* path) {
    return guard([&] { wafer::export_manifest(path, ds->samples); });
}

size_t hqmv_dataset_size(const hqmv_dataset* ds) {
    return ds ? ds->samples.size() : 0;
}

void hqmv_dataset_free(hqmv_dataset* ds) { delete ds; }

hqmv_model* hqmv_model_create(const hqmv_model_config* cfg, uint64_t seed) {
    return guard_new<hqmv_model>(
        [&] { return new hqmv_model{harness::Model::build(to_config(cfg), seed)}; });
}

hqmv_model* hqmv_model_open(const char* checkpoint_path) {
    return guard_new<hqmv_model>(
        [&] { return new hqmv_model{harness::Model::load(checkpoint_path)}; });
}

int hqmv_model_save(hqmv_model* model, const char* checkpoint_path) {
    return guard([&] { model->model.save(checkpoint_path); });
}

void hqmv_model_free(hqmv_model* model) { delete model; }

int hqmv_train(hqmv_model* model, const hqmv_dataset* ds,
               const hqmv_train_config* tc, const char* history_csv_or_null) {
    return guard([&] {
        const auto cfg = to_train_config(tc);
        const auto split = harness::split_dataset(ds->samples, cfg.seed);
        const auto hist = harness::train(model->model, split.train, split.val, cfg);
        if (history_csv_or_null) {
            std::ofstream out(history_csv_or_null, std::ios::trunc);
            if (!out)
                throw std::runtime_error(std::string("cannot write history: ") +
                                         history_csv_or_null);
            out << "epoch,train_loss,val_loss,val_macro_f1,wall_time_s\n";
            for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
                out << e << "," << hist.train_loss[e] << "," << hist.val_loss[e] << ","
                    << hist.val_macro_f1[e] << "," << hist.wall_time[e] << "\n";
        }
    });
}

int hqmv_eval_report(const hqmv_model* model, const hqmv_dataset* ds,
                     const char* report_dir) {
    return guard(
        [&] { harness::write_eval_reports(model->model, ds->samples, report_dir); });
}

int hqmv_risk_report(const hqmv_model* model, const hqmv_dataset* ds,
                     const char* critical_class, double fp_cost,
                     const char* report_dir) {
    return guard([&] {
        const int idx = wafer::class_index(critical_class ? critical_class : "");
        if (idx < 0)
            throw std::invalid_argument(std::string("unknown class: ") +
                                        (critical_class ? critical_class : "(null)"));
        harness::write_risk_reports(model->model, ds->samples, std::size_t(idx),
                                    fp_cost, report_dir);
    });
}

int hqmv_ablate(const hqmv_dataset* ds, const hqmv_model_config* cfg,
                const hqmv_train_config* tc, const char* report_dir) {
    return guard([&] {
        harness::ablation_run(ds->samples, to_config(cfg), to_train_config(tc),
                              report_dir);
    });
}

int hqmv_gradcheck(int full, double* max_rel_err) {
    return guard([&] {
        harness::ModelConfig mc;
        mc.H = 8;
        mc.W = 8;
        mc.patch = 2;
        mc.D = full ? 8 : 4;
        mc.n_blocks = full ? 2 : 1;
        mc.N = full ? 4 : 2;
        mc.use_qca = true;
        mc.n_qubits = full ? 4 : 2;
        mc.qca_layers = 2;
        harness::Model model = harness::Model::build(mc, 7);
        model.qca_params.lambda = 0.5;  // leave the init identity, reach the circuit

        wafer::DatasetConfig dc;
        dc.H = 8;
        dc.W = 8;
        dc.noise_rate = 0.0;
        dc.seed = 7;
        Rng rng(7);
        std::vector<wafer::WaferSample> batch;
        // 8x8 grids are below the generator minimum; build tiny grids directly
        for (int i = 0; i < 2; ++i) {
            wafer::WaferSample s;
            s.H = 8;
            s.W = 8;
            s.grid.resize(64);
            for (auto& v : s.grid) v = std::uint8_t(rng.below(3));
            s.label[rng.below(wafer::kNumClasses)] = 1;
            s.label[rng.below(wafer::kNumClasses)] = 1;
            batch.push_back(s);
        }
        const auto reports = harness::model_grad_check(model, batch, 2.0);
        double worst = 0.0;
        for (const auto& r : reports) worst = std::max(worst, r.max_rel_err);
        if (max_rel_err) *max_rel_err = worst;
    });
}

}  // extern "C"
