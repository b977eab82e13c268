#pragma once

#include <cmath>

namespace hqmv {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double silu(double x) { return x * sigmoid(x); }

// d/dx x*sigma(x) = sigma(x) * (1 + x * (1 - sigma(x)))
inline double silu_deriv(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

inline double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

// (e^z - 1)/z, the ZOH input-discretization factor; exact limit 1 at z=0.
inline double phi1(double z) {
    if (std::fabs(z) < 1e-8) return 1.0 + z / 2.0 + z * z / 6.0;
    return std::expm1(z) / z;
}

// d/dz phi1(z) = (e^z (z - 1) + 1) / z^2
inline double phi1_deriv(double z) {
    if (std::fabs(z) < 1e-5) return 0.5 + z / 3.0 + z * z / 8.0;
    return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
}

}  // namespace hqmv
