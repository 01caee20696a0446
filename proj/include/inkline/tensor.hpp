#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace inkline {

inline size_t numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

// Dense row-major 64-bit float array. Rank is the shape length; scalars are
// rank-0 with one element.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> v;

    Tensor() : v(1, 0.0) {}
    explicit Tensor(std::vector<size_t> s, double fill = 0.0) : shape(std::move(s)), v(numel(shape), fill) {}
    static Tensor scalar(double x) {
        Tensor t;
        t.v[0] = x;
        return t;
    }

    size_t size() const { return v.size(); }
    double& operator[](size_t i) { return v[i]; }
    double operator[](size_t i) const { return v[i]; }

    // 2-D accessors (row-major)
    size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double& at(size_t r, size_t c) { return v[r * cols() + c]; }
    double at(size_t r, size_t c) const { return v[r * cols() + c]; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline std::string shape_str(const std::vector<size_t>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

// Named trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, std::vector<size_t> shape) : name(std::move(n)), value(shape), grad(shape) {}

    void zero_grad() { grad.fill(0.0); }
    size_t size() const { return value.size(); }
};

}  // namespace inkline
