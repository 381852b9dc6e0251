// Dense row-major tensor of doubles. Just enough structure for the
// hand-written forward/backward passes; no views, no broadcasting.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace langid {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape) {
        Tensor t;
        t.shape = std::move(shape);
        t.data.assign(t.element_count(), 0.0);
        return t;
    }

    std::size_t element_count() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) {
        return data[static_cast<std::size_t>(i) * dim(1) + j];
    }
    double at(int i, int j) const {
        return data[static_cast<std::size_t>(i) * dim(1) + j];
    }
    double& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    Tensor& operator+=(const Tensor& other) {
        require(same_shape(other), "tensor shape mismatch in +=");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
        return *this;
    }

    Tensor& scale(double s) {
        for (double& v : data) v *= s;
        return *this;
    }

    static void require(bool cond, const std::string& msg) {
        if (!cond) throw std::invalid_argument(msg);
    }
};

inline std::string shape_string(const Tensor& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

// Ops assert finiteness of what they produce; a NaN or Inf anywhere is a
// training bug we want surfaced immediately, not propagated.
inline void check_finite(const Tensor& t, const char* what) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value in ") + what);
        }
    }
}

}  // namespace langid
