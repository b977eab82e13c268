#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "hqmv/model.hpp"
#include "hqmv/train.hpp"

using namespace hqmv;
using namespace hqmv::harness;

namespace {

ModelConfig tiny_config(bool hybrid) {
    ModelConfig cfg;
    cfg.H = 16;
    cfg.W = 16;
    cfg.patch = 2;
    cfg.D = 4;
    cfg.n_blocks = 1;
    cfg.N = 2;
    cfg.use_qca = hybrid;
    cfg.n_qubits = 2;
    cfg.qca_layers = 2;
    return cfg;
}

std::vector<wafer::WaferSample> tiny_dataset(std::uint64_t seed, std::size_t per_class) {
    wafer::DatasetConfig dc;
    dc.H = 16;
    dc.W = 16;
    dc.seed = seed;
    dc.counts = {{{wafer::Defect::Center}, per_class},
                 {{wafer::Defect::EdgeRing}, per_class},
                 {{wafer::Defect::Center, wafer::Defect::Scratch}, per_class}};
    return wafer::generate_dataset(dc);
}

std::vector<double> flat_params(Model& m) {
    std::vector<double> out;
    for (const auto& r : m.param_refs())
        out.insert(out.end(), r.p, r.p + r.n);
    return out;
}

std::string temp_ckpt() {
    return "/tmp/hqmv_harness_test_" + std::to_string(::getpid()) + ".hqmv";
}

}  // namespace

TEST_CASE("parameter count matches the hand tally") {
    // stem 3*4+4; block: 32+12+20+8+4+16; qca: 8+8+12+1; head: 32+8
    Model hybrid = Model::build(tiny_config(true), 42);
    CHECK(hybrid.param_count() == 177);
    CHECK(hybrid.trainable_count() == 177);
    Model classical = Model::build(tiny_config(false), 42);
    CHECK(classical.param_count() == 148);
}

TEST_CASE("lora freezes the base weights it wraps") {
    ModelConfig cfg = tiny_config(false);
    cfg.use_lora = true;
    cfg.lora_rank = 2;
    cfg.lora_alpha = 4.0;
    Model m = Model::build(cfg, 42);
    std::size_t frozen = 0, lora_params = 0;
    for (const auto& r : m.param_refs()) {
        if (!r.trainable) frozen += r.n;
        if (r.name.find("lora_") != std::string::npos) lora_params += r.n;
    }
    // W_in, W_proj, W_out, head bases freeze: 32 + 20 + 16 + 32
    CHECK(frozen == 100);
    CHECK(lora_params > 0);
    CHECK(m.trainable_count() == m.param_count() - frozen);
}

TEST_CASE("classical parameters are bitwise identical across twin builds") {
    Model hybrid = Model::build(tiny_config(true), 42);
    Model classical = Model::build(tiny_config(false), 42);
    CHECK(hybrid.stem.W == classical.stem.W);
    CHECK(hybrid.stem.bias == classical.stem.bias);
    CHECK(hybrid.blocks[0].W_in.W == classical.blocks[0].W_in.W);
    CHECK(hybrid.blocks[0].conv_k == classical.blocks[0].conv_k);
    CHECK(hybrid.blocks[0].A_log == classical.blocks[0].A_log);
    CHECK(hybrid.head.W == classical.head.W);
    CHECK(hybrid.qca_params.lambda == 0.0);
}

TEST_CASE("hybrid at init scores bitwise like its classical twin") {
    Model hybrid = Model::build(tiny_config(true), 7);
    Model classical = Model::build(tiny_config(false), 7);
    for (const auto& s : tiny_dataset(3, 2)) {
        const auto a = hybrid.forward(s);
        const auto b = classical.forward(s);
        CHECK(a == b);
        for (double p : a) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
        CHECK(hybrid.gate_activation_mean(s) == 0.0);
    }
}

TEST_CASE("build is deterministic per seed") {
    Model a = Model::build(tiny_config(true), 99);
    Model b = Model::build(tiny_config(true), 99);
    Model c = Model::build(tiny_config(true), 100);
    CHECK(flat_params(a) == flat_params(b));
    CHECK(flat_params(a) != flat_params(c));
}

TEST_CASE("split is seeded, sized and reproducible") {
    auto data = tiny_dataset(11, 20);  // 60 samples
    auto s1 = split_dataset(data, 42, 30, 15, 15);
    auto s2 = split_dataset(data, 42, 30, 15, 15);
    CHECK(s1.train.size() == 30);
    CHECK(s1.val.size() == 15);
    CHECK(s1.test.size() == 15);
    CHECK(s1.train[0].grid == s2.train[0].grid);
    CHECK(s1.test[14].grid == s2.test[14].grid);
    auto s3 = split_dataset(data, 43, 30, 15, 15);
    bool differs = false;
    for (std::size_t i = 0; i < 30 && !differs; ++i)
        differs = s1.train[i].grid != s3.train[i].grid;
    CHECK(differs);

    // proportional shrink when the dataset is smaller than requested
    auto shrunk = split_dataset(data, 42, 3000, 600, 600);
    CHECK(shrunk.train.size() + shrunk.val.size() + shrunk.test.size() == 60);
    CHECK(shrunk.train.size() == 42);  // floor(60 * 3000/4200)
}

TEST_CASE("zero learning rate leaves every parameter untouched") {
    auto data = tiny_dataset(21, 4);
    Model m = Model::build(tiny_config(true), 5);
    auto before = flat_params(m);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.lr = 0.0;
    auto hist = train(m, data, data, tc);
    CHECK(flat_params(m) == before);
    CHECK(hist.train_loss.size() == 2);
    CHECK(hist.val_loss.size() == 2);
    CHECK(hist.val_macro_f1.size() == 2);
}

TEST_CASE("training runs are bitwise reproducible") {
    auto data = tiny_dataset(31, 6);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.lr = 1e-3;

    Model a = Model::build(tiny_config(true), 8);
    auto ha = train(a, data, data, tc);
    Model b = Model::build(tiny_config(true), 8);
    auto hb = train(b, data, data, tc);

    CHECK(ha.train_loss == hb.train_loss);
    CHECK(ha.val_loss == hb.val_loss);
    CHECK(ha.val_macro_f1 == hb.val_macro_f1);
    CHECK(flat_params(a) == flat_params(b));
}

TEST_CASE("a single sample can be driven to near-zero loss") {
    auto data = tiny_dataset(41, 1);
    std::vector<wafer::WaferSample> one = {data[0]};
    ModelConfig cfg = tiny_config(false);
    cfg.D = 8;
    Model m = Model::build(cfg, 3);
    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 1;
    tc.lr = 0.01;
    train(m, one, one, tc);
    CHECK(dataset_loss(m, one, tc.gamma) < 0.01);
}

TEST_CASE("checkpoints round-trip bitwise") {
    auto data = tiny_dataset(51, 2);
    ModelConfig cfg = tiny_config(true);
    cfg.use_lora = true;
    cfg.lora_rank = 2;
    cfg.lora_alpha = 4.0;
    Model m = Model::build(cfg, 12);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 2;
    auto path = temp_ckpt();
    train(m, data, data, tc);
    m.save(path);
    Model back = Model::load(path);
    CHECK(flat_params(back) == flat_params(m));
    for (const auto& s : data) CHECK(back.forward(s) == m.forward(s));
    std::remove(path.c_str());
    CHECK_THROWS_AS(Model::load(path), std::runtime_error);
}

TEST_CASE("corrupt checkpoints are rejected") {
    auto path = temp_ckpt();
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("HQMVgarbage", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(Model::load(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("threaded evaluation matches serial bitwise") {
    auto data = tiny_dataset(61, 5);
    Model m = Model::build(tiny_config(true), 77);
    const auto serial = evaluate(m, data);
    ::setenv("HQMV_THREADS", "4", 1);
    const auto threaded = evaluate(m, data);
    ::unsetenv("HQMV_THREADS");
    CHECK(serial.scores == threaded.scores);
    CHECK(serial.labels == threaded.labels);
}

TEST_CASE("full-model gradients match finite differences") {
    auto data = tiny_dataset(71, 1);
    std::vector<wafer::WaferSample> batch = {data[0], data[1]};
    ModelConfig cfg = tiny_config(true);
    Model m = Model::build(cfg, 9);
    m.qca_params.lambda = 0.5;  // exercise the quantum path
    auto reports = model_grad_check(m, batch, 2.0);
    CHECK(!reports.empty());
    for (const auto& r : reports) {
        INFO(r.param_name, " analytic=", r.analytic, " numeric=", r.numeric);
        const bool quantum = r.param_name == "qca.W_red" || r.param_name == "qca.theta";
        CHECK(r.max_rel_err < (quantum ? 1e-4 : 1e-5));
    }
}

TEST_CASE("defect counts come from the label bits") {
    auto data = tiny_dataset(81, 2);
    auto counts = defect_counts(data);
    REQUIRE(counts.size() == 6);
    CHECK(counts[0] == 1);
    CHECK(counts[4] == 2);  // Center + Scratch pair
}
