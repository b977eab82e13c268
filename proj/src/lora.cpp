#include "hqmv/lora.hpp"

#include <stdexcept>
#include <string>

namespace hqmv::peft {

LoraAdapter lora_init(std::size_t d, std::size_t k, std::size_t r, double alpha,
                      Rng& rng) {
    if (r < 1 || r > d || r > k)
        throw std::invalid_argument("lora_init: rank " + std::to_string(r) +
                                    " invalid for " + std::to_string(d) + "x" +
                                    std::to_string(k));
    LoraAdapter a;
    a.d = d;
    a.k = k;
    a.r = r;
    a.alpha = alpha;
    a.A.resize(r * k);
    for (auto& v : a.A) v = rng.normal(0.0, 0.02);
    a.B.assign(d * r, 0.0);
    return a;
}

std::vector<double> lora_forward(const std::vector<double>& x,
                                 const LoraAdapter& adapter,
                                 const std::vector<double>& W0) {
    if (x.size() != adapter.k)
        throw std::invalid_argument("lora_forward: x width mismatch");
    std::vector<double> h(adapter.d, 0.0);
    for (std::size_t i = 0; i < adapter.d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < adapter.k; ++j)
            acc += W0[i * adapter.k + j] * x[j];
        h[i] = acc;
    }
    std::vector<double> ax(adapter.r, 0.0);
    for (std::size_t p = 0; p < adapter.r; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < adapter.k; ++j)
            acc += adapter.A[p * adapter.k + j] * x[j];
        ax[p] = acc;
    }
    const double s = adapter.scale();
    for (std::size_t i = 0; i < adapter.d; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < adapter.r; ++p)
            acc += adapter.B[i * adapter.r + p] * ax[p];
        h[i] += s * acc;
    }
    return h;
}

std::vector<double> lora_merge(const LoraAdapter& adapter,
                               const std::vector<double>& W0) {
    std::vector<double> W = W0;
    const double s = adapter.scale();
    for (std::size_t i = 0; i < adapter.d; ++i)
        for (std::size_t p = 0; p < adapter.r; ++p) {
            const double b = adapter.B[i * adapter.r + p];
            if (b == 0.0) continue;
            for (std::size_t j = 0; j < adapter.k; ++j)
                W[i * adapter.k + j] += s * b * adapter.A[p * adapter.k + j];
        }
    return W;
}

LinearWeights LinearWeights::zeros(std::size_t in, std::size_t out, bool with_bias) {
    LinearWeights lw;
    lw.in = in;
    lw.out = out;
    lw.W.assign(out * in, 0.0);
    if (with_bias) lw.bias.assign(out, 0.0);
    return lw;
}

void LinearWeights::attach_lora(std::size_t r, double alpha, Rng& rng) {
    lora = lora_init(out, in, r, alpha, rng);
}

Tensor LinearWeights::forward(const Tensor& X) const {
    if (X.shape.size() != 2 || X.shape[1] != in)
        throw std::invalid_argument("LinearWeights: input width mismatch");
    const std::size_t L = X.shape[0];
    Tensor Y = Tensor::zeros({L, out});
    for (std::size_t t = 0; t < L; ++t) {
        const double* x = &X.data[t * in];
        double* y = &Y.data[t * out];
        for (std::size_t i = 0; i < out; ++i) {
            double acc = bias.empty() ? 0.0 : bias[i];
            const double* w = &W[i * in];
            for (std::size_t j = 0; j < in; ++j) acc += w[j] * x[j];
            y[i] = acc;
        }
        if (lora) {
            const auto& ad = *lora;
            const double s = ad.scale();
            std::vector<double> ax(ad.r, 0.0);
            for (std::size_t p = 0; p < ad.r; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < in; ++j) acc += ad.A[p * in + j] * x[j];
                ax[p] = acc;
            }
            for (std::size_t i = 0; i < out; ++i) {
                double acc = 0.0;
                for (std::size_t p = 0; p < ad.r; ++p)
                    acc += ad.B[i * ad.r + p] * ax[p];
                y[i] += s * acc;
            }
        }
    }
    return Y;
}

LinearGrads linear_backward(const LinearWeights& lw, const Tensor& X,
                            const Tensor& gY, Tensor& gX) {
    const std::size_t L = X.shape[0];
    LinearGrads g;
    g.gW.assign(lw.W.size(), 0.0);
    if (!lw.bias.empty()) g.gbias.assign(lw.bias.size(), 0.0);
    if (lw.lora) {
        g.gA.assign(lw.lora->A.size(), 0.0);
        g.gB.assign(lw.lora->B.size(), 0.0);
    }
    for (std::size_t t = 0; t < L; ++t) {
        const double* x = &X.data[t * lw.in];
        const double* gy = &gY.data[t * lw.out];
        double* gx = &gX.data[t * lw.in];
        for (std::size_t i = 0; i < lw.out; ++i) {
            const double gyi = gy[i];
            if (!lw.bias.empty()) g.gbias[i] += gyi;
            const double* w = &lw.W[i * lw.in];
            double* gw = &g.gW[i * lw.in];
            for (std::size_t j = 0; j < lw.in; ++j) {
                gw[j] += gyi * x[j];
                gx[j] += gyi * w[j];
            }
        }
        if (lw.lora) {
            const auto& ad = *lw.lora;
            const double s = ad.scale();
            std::vector<double> ax(ad.r, 0.0), gax(ad.r, 0.0);
            for (std::size_t p = 0; p < ad.r; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < lw.in; ++j) acc += ad.A[p * lw.in + j] * x[j];
                ax[p] = acc;
            }
            for (std::size_t i = 0; i < lw.out; ++i) {
                const double gyi = s * gy[i];
                for (std::size_t p = 0; p < ad.r; ++p) {
                    g.gB[i * ad.r + p] += gyi * ax[p];
                    gax[p] += gyi * ad.B[i * ad.r + p];
                }
            }
            for (std::size_t p = 0; p < ad.r; ++p) {
                const double gaxp = gax[p];
                for (std::size_t j = 0; j < lw.in; ++j) {
                    g.gA[p * lw.in + j] += gaxp * x[j];
                    gx[j] += gaxp * ad.A[p * lw.in + j];
                }
            }
        }
    }
    return g;
}

}  // namespace hqmv::peft
