#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace hqmv::qsim {

enum class Axis { X, Y, Z };

// Exact statevector of an n-qubit register. Qubit i addresses bit i of the
// basis index (little-endian wires).
struct StateVector {
    std::size_t n_qubits = 0;
    std::vector<std::complex<double>> amps;

    double norm() const;
};

// Strongly-entangling-layer parameters: per layer and wire a composite
// rotation Rz(t0) Ry(t1) Rz(t2), then a ring of CNOTs i -> (i+1) mod n.
struct CircuitParams {
    std::size_t n_qubits = 4;
    std::size_t n_layers = 2;
    std::vector<double> theta;  // [layer][wire][3], flat row-major

    std::size_t theta_count() const { return n_layers * n_qubits * 3; }
    double& theta_at(std::size_t l, std::size_t w, std::size_t k) {
        return theta[(l * n_qubits + w) * 3 + k];
    }
    double theta_at(std::size_t l, std::size_t w, std::size_t k) const {
        return theta[(l * n_qubits + w) * 3 + k];
    }
};

StateVector zero_state(std::size_t n_qubits);

// exp(-i * angle * sigma_axis / 2) applied on one wire, in place.
void apply_rotation(StateVector& state, Axis axis, std::size_t wire, double angle);
void apply_cnot(StateVector& state, std::size_t control, std::size_t target);

void entangling_layers(StateVector& state, const CircuitParams& params);

// Per-wire Pauli-Z expectation of the Rx-embedded, entangled register.
std::vector<double> circuit_forward(const std::vector<double>& phi,
                                    const CircuitParams& params);

struct CircuitGrad {
    // d_phi[q][i]   = d<Z_q>/d phi_i        (n_q x n_q)
    // d_theta[q][p] = d<Z_q>/d theta_p      (n_q x L*n_q*3)
    std::vector<std::vector<double>> d_phi;
    std::vector<std::vector<double>> d_theta;
};

// Parameter-shift gradients: every gate is a Pauli rotation, so
// g = [f(t + pi/2) - f(t - pi/2)] / 2 is exact.
CircuitGrad circuit_grad(const std::vector<double>& phi, const CircuitParams& params);

}  // namespace hqmv::qsim
