#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hqmv/activations.hpp"
#include "hqmv/tensor.hpp"

namespace hqmv {

enum class Squash { Sigmoid, Tanh };

Tensor silu(const Tensor& x);
Tensor sigmoid_tanh(const Tensor& x, Squash kind);

// One row of a gradient-check report: worst element of one named parameter.
struct GradReport {
    std::string param_name;
    double max_rel_err = 0.0;
    double analytic = 0.0;  // analytic value at the worst element
    double numeric = 0.0;   // finite-difference value at the worst element
};

// A named view into a flat parameter buffer plus the module-supplied
// analytic gradient for it.
struct ParamView {
    std::string name;
    double* values = nullptr;
    const double* analytic_grad = nullptr;
    std::size_t n = 0;
};

// Central finite differences against analytic gradients, one report per
// parameter, sorted by max_rel_err descending. `f` re-evaluates the loss at
// the current parameter values; parameters are restored after probing.
std::vector<GradReport> grad_check(const std::function<double()>& f,
                                   std::vector<ParamView> params,
                                   double eps = 1e-3);

}  // namespace hqmv
