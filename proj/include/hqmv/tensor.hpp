#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hqmv {

// Dense row-major tensor of 64-bit floats. The shape is metadata over a flat
// buffer; reshape never copies.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != data.size())
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    std::size_t size() const { return data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D accessors (row-major).
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    Tensor reshaped(std::vector<std::size_t> s) const {
        if (count(s) != data.size())
            throw std::invalid_argument("Tensor: reshape count mismatch");
        return Tensor(std::move(s), data);
    }
};

// Throws naming the first non-finite index.
void check_finite(const std::vector<double>& v, const std::string& what);
inline void check_finite(const Tensor& t, const std::string& what) {
    check_finite(t.data, what);
}

}  // namespace hqmv
