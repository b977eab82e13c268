#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hqmv/rng.hpp"
#include "hqmv/tensor.hpp"

namespace hqmv::peft {

// Trainable low-rank bypass around a frozen base weight:
// h = W0 x + (alpha/r) B (A x). A is r x k, B is d x r.
struct LoraAdapter {
    std::size_t d = 0, k = 0, r = 0;
    double alpha = 0.0;
    std::vector<double> A;  // r x k
    std::vector<double> B;  // d x r

    double scale() const { return alpha / double(r); }
    std::size_t trainable_count() const { return r * (d + k); }
};

// A ~ N(0, 0.02), B = 0, so the bypass is exactly zero at init.
LoraAdapter lora_init(std::size_t d, std::size_t k, std::size_t r, double alpha,
                      Rng& rng);

// Single-vector forward against an explicit frozen base (d x k row-major).
std::vector<double> lora_forward(const std::vector<double>& x,
                                 const LoraAdapter& adapter,
                                 const std::vector<double>& W0);

// W_eff = W0 + (alpha/r) B A, folded for inference.
std::vector<double> lora_merge(const LoraAdapter& adapter,
                               const std::vector<double>& W0);

// Linear layer `out x in` with optional bias and optional adapter. When the
// adapter is present the base weight is frozen and only A, B train.
struct LinearWeights {
    std::size_t in = 0, out = 0;
    std::vector<double> W;     // out x in
    std::vector<double> bias;  // size out, or empty for no bias
    std::optional<LoraAdapter> lora;

    static LinearWeights zeros(std::size_t in, std::size_t out, bool with_bias);
    // Y[t] = W X[t] + b (+ lora bypass); X is L x in, Y is L x out.
    Tensor forward(const Tensor& X) const;
    void attach_lora(std::size_t r, double alpha, Rng& rng);
};

struct LinearGrads {
    std::vector<double> gW, gbias, gA, gB;
};

// Reverse-mode through the layer; adds the input gradient into gX.
LinearGrads linear_backward(const LinearWeights& lw, const Tensor& X,
                            const Tensor& gY, Tensor& gX);

}  // namespace hqmv::peft
