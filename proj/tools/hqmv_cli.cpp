// Command-line front end; all functionality goes through the hqmv C API.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hqmv.h"

namespace {

int fail(const char* what) {
    std::fprintf(stderr, "error: %s: %s\n", what, hqmv_last_error());
    return 1;
}

std::string model_file(const std::string& dir) {
    std::filesystem::create_directories(dir);
    return dir + "/model.hqmv";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid quantum-Mamba wafer defect toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Synthesize a wafer defect dataset");
    std::string gen_out, gen_profile = "default";
    std::uint64_t gen_seed = 42;
    std::vector<std::uint16_t> gen_size = {26, 26};
    gen->add_option("--out", gen_out, "Output .wfr path")->required();
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--size", gen_size, "Grid size H W")->expected(2);
    gen->add_option("--profile", gen_profile, "default or a profile CSV path");

    // train
    auto* tr = app.add_subcommand("train", "Train a model");
    std::string tr_data, tr_out;
    bool tr_hybrid = false, tr_classical = false;
    std::uint64_t tr_seed = 42;
    std::uint32_t tr_epochs = 20;
    std::vector<double> tr_lora;
    bool tr_deterministic = false;
    tr->add_option("--data", tr_data, "Dataset path")->required();
    tr->add_option("--out", tr_out, "Model output directory")->required();
    tr->add_flag("--hybrid", tr_hybrid, "Enable the quantum context adapter");
    tr->add_flag("--classical", tr_classical, "Strict classical ablation");
    tr->add_option("--epochs", tr_epochs, "Training epochs");
    tr->add_option("--seed", tr_seed, "RNG seed");
    tr->add_option("--lora", tr_lora, "LoRA rank and alpha")->expected(2);
    tr->add_flag("--deterministic", tr_deterministic, "Force serial reductions");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a model and emit reports");
    std::string ev_model, ev_data, ev_report;
    ev->add_option("--model", ev_model, "Model directory")->required();
    ev->add_option("--data", ev_data, "Dataset path")->required();
    ev->add_option("--report", ev_report, "Report directory")->required();

    // ablate
    auto* ab = app.add_subcommand("ablate", "Paired classical-vs-hybrid study");
    std::string ab_data, ab_report;
    std::uint64_t ab_seed = 42;
    std::uint32_t ab_epochs = 20;
    ab->add_option("--data", ab_data, "Dataset path")->required();
    ab->add_option("--report", ab_report, "Report directory")->required();
    ab->add_option("--seed", ab_seed, "RNG seed");
    ab->add_option("--epochs", ab_epochs, "Training epochs");

    // riskcurves
    auto* rc = app.add_subcommand("riskcurves", "Risk-analysis curves");
    std::string rc_model, rc_data, rc_report, rc_critical = "Near_Full";
    double rc_cost = 1.0;
    rc->add_option("--model", rc_model, "Model directory")->required();
    rc->add_option("--data", rc_data, "Dataset path")->required();
    rc->add_option("--critical", rc_critical, "Critical class name");
    rc->add_option("--fp-cost", rc_cost, "Cost per false positive");
    rc->add_option("--report", rc_report, "Report directory")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    bool gc_full = false;
    gc->add_flag("--full", gc_full, "Run the acceptance-size configuration");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        const char* profile = gen_profile == "default" ? nullptr : gen_profile.c_str();
        hqmv_dataset* ds =
            hqmv_dataset_generate(gen_seed, gen_size[0], gen_size[1], profile);
        if (!ds) return fail("generate");
        if (hqmv_dataset_save(ds, gen_out.c_str()) != HQMV_OK) {
            hqmv_dataset_free(ds);
            return fail("save");
        }
        std::printf("wrote %zu samples to %s\n", hqmv_dataset_size(ds),
                    gen_out.c_str());
        hqmv_dataset_free(ds);
        return 0;
    }

    if (tr->parsed()) {
        if (tr_hybrid == tr_classical) {
            std::fprintf(stderr, "error: pass exactly one of --hybrid/--classical\n");
            return 1;
        }
        hqmv_dataset* ds = hqmv_dataset_load(tr_data.c_str());
        if (!ds) return fail("load dataset");
        hqmv_model_config mc;
        hqmv_model_config_default(&mc);
        mc.use_qca = tr_hybrid ? 1 : 0;
        if (!tr_lora.empty()) {
            mc.use_lora = 1;
            mc.lora_rank = std::uint32_t(tr_lora[0]);
            mc.lora_alpha = tr_lora[1];
        }
        hqmv_model* model = hqmv_model_create(&mc, tr_seed);
        if (!model) {
            hqmv_dataset_free(ds);
            return fail("create model");
        }
        hqmv_train_config tc;
        hqmv_train_config_default(&tc);
        tc.epochs = tr_epochs;
        tc.seed = tr_seed;
        tc.deterministic = tr_deterministic ? 1 : tc.deterministic;
        std::filesystem::create_directories(tr_out);
        const std::string history = tr_out + "/history.csv";
        int rc_code = hqmv_train(model, ds, &tc, history.c_str());
        if (rc_code == HQMV_OK)
            rc_code = hqmv_model_save(model, model_file(tr_out).c_str());
        hqmv_model_free(model);
        hqmv_dataset_free(ds);
        if (rc_code != HQMV_OK) return fail("train");
        std::printf("model written to %s\n", (tr_out + "/model.hqmv").c_str());
        return 0;
    }

    if (ev->parsed()) {
        hqmv_model* model = hqmv_model_open((ev_model + "/model.hqmv").c_str());
        if (!model) return fail("open model");
        hqmv_dataset* ds = hqmv_dataset_load(ev_data.c_str());
        if (!ds) {
            hqmv_model_free(model);
            return fail("load dataset");
        }
        std::filesystem::create_directories(ev_report);
        const int rc_code = hqmv_eval_report(model, ds, ev_report.c_str());
        hqmv_model_free(model);
        hqmv_dataset_free(ds);
        if (rc_code != HQMV_OK) return fail("eval");
        std::printf("reports written to %s\n", ev_report.c_str());
        return 0;
    }

    if (ab->parsed()) {
        hqmv_dataset* ds = hqmv_dataset_load(ab_data.c_str());
        if (!ds) return fail("load dataset");
        hqmv_model_config mc;
        hqmv_model_config_default(&mc);
        hqmv_train_config tc;
        hqmv_train_config_default(&tc);
        tc.seed = ab_seed;
        tc.epochs = ab_epochs;
        std::filesystem::create_directories(ab_report);
        const int rc_code = hqmv_ablate(ds, &mc, &tc, ab_report.c_str());
        hqmv_dataset_free(ds);
        if (rc_code != HQMV_OK) return fail("ablate");
        std::printf("paired reports written to %s\n", ab_report.c_str());
        return 0;
    }

    if (rc->parsed()) {
        hqmv_model* model = hqmv_model_open((rc_model + "/model.hqmv").c_str());
        if (!model) return fail("open model");
        hqmv_dataset* ds = hqmv_dataset_load(rc_data.c_str());
        if (!ds) {
            hqmv_model_free(model);
            return fail("load dataset");
        }
        std::filesystem::create_directories(rc_report);
        const int rc_code = hqmv_risk_report(model, ds, rc_critical.c_str(), rc_cost,
                                             rc_report.c_str());
        hqmv_model_free(model);
        hqmv_dataset_free(ds);
        if (rc_code != HQMV_OK) return fail("riskcurves");
        std::printf("risk curves written to %s\n", rc_report.c_str());
        return 0;
    }

    if (gc->parsed()) {
        double worst = 0.0;
        if (hqmv_gradcheck(gc_full ? 1 : 0, &worst) != HQMV_OK)
            return fail("gradcheck");
        const double tol = 1e-4;
        std::printf("max relative error: %.3e (%s)\n", worst,
                    worst <= tol ? "PASS" : "FAIL");
        return worst <= tol ? 0 : 1;
    }
    return 0;
}
