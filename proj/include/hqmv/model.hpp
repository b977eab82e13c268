#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hqmv/lora.hpp"
#include "hqmv/qca.hpp"
#include "hqmv/ssm.hpp"
#include "hqmv/wafer.hpp"

namespace hqmv::harness {

struct ModelConfig {
    std::uint16_t H = 26, W = 26;
    std::size_t patch = 2;
    std::size_t D = 16;
    std::size_t n_blocks = 2;
    std::size_t N = 8;
    bool use_qca = true;
    std::size_t n_qubits = 4;
    std::size_t qca_layers = 2;
    bool use_lora = false;
    std::size_t lora_rank = 4;
    double lora_alpha = 8.0;
    std::size_t conv_k = 3;
    static constexpr std::size_t C = wafer::kNumClasses;

    std::size_t tokens_h() const { return H / patch; }
    std::size_t tokens_w() const { return W / patch; }
    std::size_t n_tokens() const { return tokens_h() * tokens_w(); }
    void validate() const;
};

// Named view of one parameter tensor; order is the checkpoint order.
struct ParamRef {
    std::string name;
    double* p = nullptr;
    std::size_t n = 0;
    bool trainable = true;
    bool quantum = false;  // gradient flows through the circuit jacobian
};

struct SampleCache {
    Tensor tokens_in;  // L x 3 patch means
    Tensor tokens0;    // L x D after stem
    std::vector<Tensor> block_in;
    std::vector<ssm::MambaBlockCache> blocks;
    Tensor pre_qca;  // L x D
    qca::QcaCache qca;
    Tensor post;  // L x D after optional QCA
    std::vector<double> pooled, logits, scores;
};

struct ModelGrads {
    std::vector<double> flat;  // aligned with param_refs order
    void reset() { std::fill(flat.begin(), flat.end(), 0.0); }
};

// Patch stem -> Mamba blocks -> optional QCA -> mean pool -> sigmoid head.
struct Model {
    ModelConfig cfg;
    peft::LinearWeights stem;  // 3 -> D, with bias
    std::vector<ssm::MambaBlockParams> blocks;
    qca::QcaParams qca_params;
    peft::LinearWeights head;  // D -> C, with bias

    static Model build(const ModelConfig& cfg, std::uint64_t seed);

    std::vector<ParamRef> param_refs();
    std::size_t param_count();
    std::size_t trainable_count();

    // Per-class sigmoid scores for one wafer.
    std::vector<double> forward(const wafer::WaferSample& s,
                                SampleCache* cache = nullptr) const;

    // Accumulates dLoss/dparams into g.flat given dLoss/dlogits.
    void backward(const SampleCache& cache, const std::vector<double>& glogits,
                  ModelGrads& g) const;

    // Mean over channels of |lambda|*G for one wafer (0 when QCA is off).
    double gate_activation_mean(const wafer::WaferSample& s) const;

    void save(const std::string& path);
    static Model load(const std::string& path);
};

}  // namespace hqmv::harness
