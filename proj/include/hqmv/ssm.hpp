#pragma once

#include <cstddef>
#include <vector>

#include "hqmv/lora.hpp"
#include "hqmv/tensor.hpp"

namespace hqmv::ssm {

// ZOH discretization of one (channel, state) pair.
// a_d = exp(delta*a); b_d = phi1(delta*a) * delta * b.
struct Discretized {
    double a_d;
    double b_d;
};
Discretized discretize(double delta, double a, double b);

// Sequential state-space recurrence. Shapes: x, delta L x D; A D x N;
// B, C L x N. Returns y L x D.
Tensor selective_scan_seq(const Tensor& x, const Tensor& delta, const Tensor& A,
                          const Tensor& B, const Tensor& C);

// Identical output, cache-blocked over fixed-size chunks with the hidden
// state carried across chunk boundaries.
Tensor selective_scan_chunked(const Tensor& x, const Tensor& delta, const Tensor& A,
                              const Tensor& B, const Tensor& C, std::size_t chunk);

struct ScanGrads {
    Tensor gx, gdelta, gA, gB, gC;
};
ScanGrads selective_scan_backward(const Tensor& x, const Tensor& delta,
                                  const Tensor& A, const Tensor& B, const Tensor& C,
                                  const Tensor& gy);

// One Mamba block. The state matrix is diagonal per (channel, state) and
// stored as A = -exp(A_log) so every discretized a_d lands in (0, 1).
struct MambaBlockParams {
    std::size_t D = 0;  // model width
    std::size_t N = 0;  // state dimension
    std::size_t K = 3;  // depthwise causal conv width

    peft::LinearWeights W_in;    // D -> 2D
    std::vector<double> conv_k;  // D x K, conv_k[d*K + K-1] hits the current token
    peft::LinearWeights W_proj;  // D -> 1 + 2N, emits (delta_raw, B, C)
    std::vector<double> A_log;   // D x N
    std::vector<double> delta_bias;  // D
    peft::LinearWeights W_out;   // D -> D

    static MambaBlockParams zeros(std::size_t D, std::size_t N, std::size_t K = 3);
};

struct MambaBlockCache {
    Tensor X, xz, xc, xa, delta, Bm, Cm, y, g;
    std::vector<double> delta_raw;  // L
};

// Forward pass of Alg-style block: split, causal depthwise conv + SiLU,
// data-dependent (delta, B, C), scan, SiLU gate, output projection, residual.
Tensor mamba_block_forward(const Tensor& X, const MambaBlockParams& p,
                           MambaBlockCache* cache = nullptr);

struct MambaBlockGrads {
    Tensor gX;
    peft::LinearGrads gW_in, gW_proj, gW_out;
    std::vector<double> g_conv_k, gA_log, g_delta_bias;
};

MambaBlockGrads mamba_block_backward(const Tensor& X, const MambaBlockParams& p,
                                     const MambaBlockCache& cache,
                                     const Tensor& upstream);

}  // namespace hqmv::ssm
