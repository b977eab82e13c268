#pragma once

#include <cstddef>
#include <vector>

#include "hqmv/qsim.hpp"
#include "hqmv/tensor.hpp"

namespace hqmv::qca {

// Pool -> reduce -> quantum circuit -> expand -> residual gate.
// lambda starts at exactly 0 so the adapter is the identity at init.
struct QcaParams {
    std::size_t channels = 0;           // C at the bottleneck
    std::vector<double> W_red;          // n_q x C
    std::vector<double> W_exp;          // C x n_q
    qsim::CircuitParams circuit;
    double lambda = 0.0;

    std::size_t n_qubits() const { return circuit.n_qubits; }
};

// Feature maps are B x C x H x W row-major tensors throughout.

Tensor gap(const Tensor& X);                                        // -> B x C
Tensor reduce_encode(const Tensor& v, const QcaParams& p);          // -> B x n_q
Tensor expand_gate(const Tensor& y_q, const QcaParams& p);          // -> B x C

struct QcaCache {
    Tensor v;      // B x C
    Tensor u;      // B x n_q, pre-tanh reduction
    Tensor phi;    // B x n_q
    Tensor y_q;    // B x n_q
    Tensor G;      // B x C
};

Tensor qca_forward(const Tensor& X, const QcaParams& p, QcaCache* cache = nullptr);

struct QcaGrads {
    Tensor gX;
    std::vector<double> gW_red, gW_exp, gtheta;
    double glambda = 0.0;
};

QcaGrads qca_backward(const Tensor& X, const QcaParams& p, const QcaCache& cache,
                      const Tensor& upstream);

// |lambda| * G per (sample, channel); the quantity behind per-class
// gate-activation reports.
Tensor gate_activation(const Tensor& X, const QcaParams& p);

}  // namespace hqmv::qca
