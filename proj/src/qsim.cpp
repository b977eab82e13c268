#include "hqmv/qsim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hqmv::qsim {

namespace {

constexpr std::size_t kMaxQubits = 12;
constexpr double kHalfPi = 1.5707963267948966;

using cd = std::complex<double>;

// Applies the 2x2 unitary [[a,b],[c,d]] on one wire via bit-mask strides.
void apply_1q(StateVector& s, std::size_t wire, cd a, cd b, cd c, cd d) {
    const std::size_t stride = std::size_t(1) << wire;
    const std::size_t dim = s.amps.size();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const cd a0 = s.amps[i];
            const cd a1 = s.amps[i + stride];
            s.amps[i] = a * a0 + b * a1;
            s.amps[i + stride] = c * a0 + d * a1;
        }
    }
}

void check_wire(const StateVector& s, std::size_t wire, const char* who) {
    if (wire >= s.n_qubits)
        throw std::out_of_range(std::string(who) + ": wire " + std::to_string(wire) +
                                " out of range for " + std::to_string(s.n_qubits) +
                                " qubits");
}

std::vector<double> z_expectations(const StateVector& s) {
    std::vector<double> out(s.n_qubits, 0.0);
    for (std::size_t idx = 0; idx < s.amps.size(); ++idx) {
        const double p = std::norm(s.amps[idx]);
        if (p == 0.0) continue;
        for (std::size_t q = 0; q < s.n_qubits; ++q)
            out[q] += ((idx >> q) & 1) ? -p : p;
    }
    return out;
}

StateVector run_circuit(const std::vector<double>& phi, const CircuitParams& params) {
    StateVector s = zero_state(params.n_qubits);
    for (std::size_t q = 0; q < params.n_qubits; ++q)
        apply_rotation(s, Axis::X, q, phi[q]);
    entangling_layers(s, params);
    return s;
}

}  // namespace

double StateVector::norm() const {
    double acc = 0.0;
    for (const auto& a : amps) acc += std::norm(a);
    return std::sqrt(acc);
}

StateVector zero_state(std::size_t n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw std::out_of_range("zero_state: n_qubits must be in [1, " +
                                std::to_string(kMaxQubits) + "], got " +
                                std::to_string(n_qubits));
    StateVector s;
    s.n_qubits = n_qubits;
    s.amps.assign(std::size_t(1) << n_qubits, cd(0.0, 0.0));
    s.amps[0] = cd(1.0, 0.0);
    return s;
}

void apply_rotation(StateVector& state, Axis axis, std::size_t wire, double angle) {
    check_wire(state, wire, "apply_rotation");
    const double ch = std::cos(angle / 2.0);
    const double sh = std::sin(angle / 2.0);
    switch (axis) {
        case Axis::X:
            apply_1q(state, wire, cd(ch, 0), cd(0, -sh), cd(0, -sh), cd(ch, 0));
            break;
        case Axis::Y:
            apply_1q(state, wire, cd(ch, 0), cd(-sh, 0), cd(sh, 0), cd(ch, 0));
            break;
        case Axis::Z:
            apply_1q(state, wire, cd(ch, -sh), cd(0, 0), cd(0, 0), cd(ch, sh));
            break;
    }
}

void apply_cnot(StateVector& state, std::size_t control, std::size_t target) {
    check_wire(state, control, "apply_cnot");
    check_wire(state, target, "apply_cnot");
    if (control == target)
        throw std::invalid_argument("apply_cnot: control and target must differ");
    const std::size_t cbit = std::size_t(1) << control;
    const std::size_t tbit = std::size_t(1) << target;
    for (std::size_t idx = 0; idx < state.amps.size(); ++idx) {
        if ((idx & cbit) && !(idx & tbit))
            std::swap(state.amps[idx], state.amps[idx | tbit]);
    }
}

void entangling_layers(StateVector& state, const CircuitParams& params) {
    if (state.n_qubits != params.n_qubits)
        throw std::invalid_argument("entangling_layers: qubit count mismatch");
    if (params.theta.size() != params.theta_count())
        throw std::invalid_argument("entangling_layers: theta size mismatch");
    const std::size_t n = params.n_qubits;
    for (std::size_t l = 0; l < params.n_layers; ++l) {
        for (std::size_t w = 0; w < n; ++w) {
            apply_rotation(state, Axis::Z, w, params.theta_at(l, w, 0));
            apply_rotation(state, Axis::Y, w, params.theta_at(l, w, 1));
            apply_rotation(state, Axis::Z, w, params.theta_at(l, w, 2));
        }
        if (n > 1) {
            for (std::size_t w = 0; w < n; ++w)
                apply_cnot(state, w, (w + 1) % n);
        }
    }
}

std::vector<double> circuit_forward(const std::vector<double>& phi,
                                    const CircuitParams& params) {
    if (phi.size() != params.n_qubits)
        throw std::invalid_argument("circuit_forward: phi length " +
                                    std::to_string(phi.size()) + " != n_qubits " +
                                    std::to_string(params.n_qubits));
    return z_expectations(run_circuit(phi, params));
}

CircuitGrad circuit_grad(const std::vector<double>& phi, const CircuitParams& params) {
    if (phi.size() != params.n_qubits)
        throw std::invalid_argument("circuit_grad: phi length mismatch");
    const std::size_t n = params.n_qubits;
    CircuitGrad g;
    g.d_phi.assign(n, std::vector<double>(n, 0.0));
    g.d_theta.assign(n, std::vector<double>(params.theta_count(), 0.0));

    std::vector<double> phi_shift = phi;
    for (std::size_t i = 0; i < n; ++i) {
        phi_shift[i] = phi[i] + kHalfPi;
        const auto plus = circuit_forward(phi_shift, params);
        phi_shift[i] = phi[i] - kHalfPi;
        const auto minus = circuit_forward(phi_shift, params);
        phi_shift[i] = phi[i];
        for (std::size_t q = 0; q < n; ++q)
            g.d_phi[q][i] = (plus[q] - minus[q]) / 2.0;
    }

    CircuitParams shifted = params;
    for (std::size_t p = 0; p < params.theta_count(); ++p) {
        shifted.theta[p] = params.theta[p] + kHalfPi;
        const auto plus = circuit_forward(phi, shifted);
        shifted.theta[p] = params.theta[p] - kHalfPi;
        const auto minus = circuit_forward(phi, shifted);
        shifted.theta[p] = params.theta[p];
        for (std::size_t q = 0; q < n; ++q)
            g.d_theta[q][p] = (plus[q] - minus[q]) / 2.0;
    }
    return g;
}

}  // namespace hqmv::qsim
