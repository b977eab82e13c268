#include "hqmv/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hqmv {

void check_finite(const std::vector<double>& v, const std::string& what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw std::invalid_argument(what + ": non-finite value at index " +
                                        std::to_string(i));
    }
}

Tensor silu(const Tensor& x) {
    check_finite(x, "silu");
    Tensor out = x;
    for (auto& v : out.data) v = silu(v);
    return out;
}

Tensor sigmoid_tanh(const Tensor& x, Squash kind) {
    check_finite(x, "sigmoid_tanh");
    Tensor out = x;
    if (kind == Squash::Sigmoid) {
        for (auto& v : out.data) v = sigmoid(v);
    } else {
        for (auto& v : out.data) v = std::tanh(v);
    }
    return out;
}

std::vector<GradReport> grad_check(const std::function<double()>& f,
                                   std::vector<ParamView> params, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be > 0");
    std::vector<GradReport> reports;
    reports.reserve(params.size());
    for (const auto& p : params) {
        GradReport rep;
        rep.param_name = p.name;
        for (std::size_t i = 0; i < p.n; ++i) {
            const double saved = p.values[i];
            // fourth-order central stencil keeps truncation error below the
            // roundoff floor even where the true gradient is tiny
            double probes[4];
            const double offs[4] = {eps, -eps, 2.0 * eps, -2.0 * eps};
            for (int k = 0; k < 4; ++k) {
                p.values[i] = saved + offs[k];
                probes[k] = f();
                if (!std::isfinite(probes[k])) {
                    p.values[i] = saved;
                    throw std::runtime_error("grad_check: non-finite loss probing " +
                                             p.name + "[" + std::to_string(i) + "]");
                }
            }
            p.values[i] = saved;
            const double numeric =
                (8.0 * (probes[0] - probes[1]) - (probes[2] - probes[3])) /
                (12.0 * eps);
            const double analytic = p.analytic_grad[i];
            const double denom =
                std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
            // Near-zero pairs count as agreement. Central differences on an
            // O(1) loss bottom out near 1e-12 absolute, so a tiny true
            // gradient cannot be certified in relative terms even when both
            // sides match to twelve decimal places.
            const double rel =
                (std::fabs(analytic) < 1e-7 && std::fabs(numeric) < 1e-7)
                    ? 0.0
                    : std::fabs(analytic - numeric) / denom;
            if (rel >= rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.analytic = analytic;
                rep.numeric = numeric;
            }
        }
        reports.push_back(rep);
    }
    std::sort(reports.begin(), reports.end(),
              [](const GradReport& a, const GradReport& b) {
                  return a.max_rel_err > b.max_rel_err;
              });
    return reports;
}

}  // namespace hqmv
