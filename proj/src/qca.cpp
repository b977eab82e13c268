#include "hqmv/qca.hpp"

#include <cmath>
#include <stdexcept>

#include "hqmv/activations.hpp"

namespace hqmv::qca {

namespace {

constexpr double kHalfPi = 1.5707963267948966;

void check_map(const Tensor& X) {
    if (X.shape.size() != 4)
        throw std::invalid_argument("qca: feature map must be B x C x H x W");
}

}  // namespace

Tensor gap(const Tensor& X) {
    check_map(X);
    const std::size_t B = X.shape[0], C = X.shape[1], HW = X.shape[2] * X.shape[3];
    Tensor v = Tensor::zeros({B, C});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const double* src = &X.data[(b * C + c) * HW];
            double acc = 0.0;
            for (std::size_t i = 0; i < HW; ++i) acc += src[i];
            v.at(b, c) = acc / double(HW);
        }
    return v;
}

Tensor reduce_encode(const Tensor& v, const QcaParams& p) {
    if (v.shape.size() != 2 || v.shape[1] != p.channels)
        throw std::invalid_argument("reduce_encode: channel width mismatch");
    const std::size_t B = v.shape[0], C = p.channels, nq = p.n_qubits();
    Tensor phi = Tensor::zeros({B, nq});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t q = 0; q < nq; ++q) {
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c)
                acc += p.W_red[q * C + c] * v.at(b, c);
            phi.at(b, q) = kHalfPi * std::tanh(acc);
        }
    return phi;
}

Tensor expand_gate(const Tensor& y_q, const QcaParams& p) {
    if (y_q.shape.size() != 2 || y_q.shape[1] != p.n_qubits())
        throw std::invalid_argument("expand_gate: qubit width mismatch");
    const std::size_t B = y_q.shape[0], C = p.channels, nq = p.n_qubits();
    Tensor G = Tensor::zeros({B, C});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::size_t q = 0; q < nq; ++q)
                acc += p.W_exp[c * nq + q] * y_q.at(b, q);
            G.at(b, c) = sigmoid(acc);
        }
    return G;
}

Tensor qca_forward(const Tensor& X, const QcaParams& p, QcaCache* cache) {
    check_map(X);
    if (X.shape[1] != p.channels)
        throw std::invalid_argument("qca_forward: channel count mismatch");
    const std::size_t B = X.shape[0], C = X.shape[1], HW = X.shape[2] * X.shape[3];
    const std::size_t nq = p.n_qubits();

    const Tensor v = gap(X);

    // Keep the pre-tanh activations for the backward chain.
    Tensor u = Tensor::zeros({B, nq});
    Tensor phi = Tensor::zeros({B, nq});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t q = 0; q < nq; ++q) {
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c)
                acc += p.W_red[q * C + c] * v.at(b, c);
            u.at(b, q) = acc;
            phi.at(b, q) = kHalfPi * std::tanh(acc);
        }

    Tensor y_q = Tensor::zeros({B, nq});
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> phi_b(nq);
        for (std::size_t q = 0; q < nq; ++q) phi_b[q] = phi.at(b, q);
        const auto exp_z = qsim::circuit_forward(phi_b, p.circuit);
        for (std::size_t q = 0; q < nq; ++q) y_q.at(b, q) = exp_z[q];
    }

    const Tensor G = expand_gate(y_q, p);

    Tensor out = X;
    if (p.lambda != 0.0) {
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
                const double m = 1.0 + p.lambda * G.at(b, c);
                double* dst = &out.data[(b * C + c) * HW];
                for (std::size_t i = 0; i < HW; ++i) dst[i] *= m;
            }
    }

    if (cache) {
        cache->v = v;
        cache->u = u;
        cache->phi = phi;
        cache->y_q = y_q;
        cache->G = G;
    }
    return out;
}

QcaGrads qca_backward(const Tensor& X, const QcaParams& p, const QcaCache& cache,
                      const Tensor& upstream) {
    check_map(X);
    const std::size_t B = X.shape[0], C = X.shape[1], HW = X.shape[2] * X.shape[3];
    const std::size_t nq = p.n_qubits();

    QcaGrads g;
    g.gX = Tensor::zeros(X.shape);
    g.gW_red.assign(p.W_red.size(), 0.0);
    g.gW_exp.assign(p.W_exp.size(), 0.0);
    g.gtheta.assign(p.circuit.theta_count(), 0.0);

    // X_out = X * (1 + lambda*G); gG needs sum over the spatial broadcast.
    Tensor gG = Tensor::zeros({B, C});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const double m = 1.0 + p.lambda * cache.G.at(b, c);
            const double* xs = &X.data[(b * C + c) * HW];
            const double* up = &upstream.data[(b * C + c) * HW];
            double* gx = &g.gX.data[(b * C + c) * HW];
            double dot = 0.0;
            for (std::size_t i = 0; i < HW; ++i) {
                gx[i] = up[i] * m;
                dot += up[i] * xs[i];
            }
            g.glambda += dot * cache.G.at(b, c);
            gG.at(b, c) = dot * p.lambda;
        }

    // G = sigma(W_exp y_q)
    Tensor gy_q = Tensor::zeros({B, nq});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const double Gv = cache.G.at(b, c);
            const double gs = gG.at(b, c) * Gv * (1.0 - Gv);
            for (std::size_t q = 0; q < nq; ++q) {
                g.gW_exp[c * nq + q] += gs * cache.y_q.at(b, q);
                gy_q.at(b, q) += gs * p.W_exp[c * nq + q];
            }
        }

    // Quantum segment: exact parameter-shift jacobians per sample.
    Tensor gphi = Tensor::zeros({B, nq});
    for (std::size_t b = 0; b < B; ++b) {
        bool any = false;
        for (std::size_t q = 0; q < nq; ++q)
            if (gy_q.at(b, q) != 0.0) any = true;
        if (!any) continue;
        std::vector<double> phi_b(nq);
        for (std::size_t q = 0; q < nq; ++q) phi_b[q] = cache.phi.at(b, q);
        const auto jac = qsim::circuit_grad(phi_b, p.circuit);
        for (std::size_t q = 0; q < nq; ++q) {
            const double gq = gy_q.at(b, q);
            if (gq == 0.0) continue;
            for (std::size_t i = 0; i < nq; ++i)
                gphi.at(b, i) += gq * jac.d_phi[q][i];
            for (std::size_t t = 0; t < p.circuit.theta_count(); ++t)
                g.gtheta[t] += gq * jac.d_theta[q][t];
        }
    }

    // phi = (pi/2) tanh(W_red v); gap spreads evenly over H*W.
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> gv(C, 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            const double th = std::tanh(cache.u.at(b, q));
            const double gu = gphi.at(b, q) * kHalfPi * (1.0 - th * th);
            for (std::size_t c = 0; c < C; ++c) {
                g.gW_red[q * C + c] += gu * cache.v.at(b, c);
                gv[c] += gu * p.W_red[q * C + c];
            }
        }
        for (std::size_t c = 0; c < C; ++c) {
            const double spread = gv[c] / double(HW);
            double* gx = &g.gX.data[(b * C + c) * HW];
            for (std::size_t i = 0; i < HW; ++i) gx[i] += spread;
        }
    }
    return g;
}

Tensor gate_activation(const Tensor& X, const QcaParams& p) {
    QcaCache cache;
    qca_forward(X, p, &cache);
    Tensor out = cache.G;
    const double mag = std::fabs(p.lambda);
    for (auto& v : out.data) v *= mag;
    return out;
}

}  // namespace hqmv::qca
