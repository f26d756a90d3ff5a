#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "evsr/common.hpp"

namespace evsr {

// Tensor extent, rank 1 to 4. Rank-4 data is laid out (n, c, h, w) row-major
// with w contiguous; lower ranks drop leading axes.
struct Shape {
    std::array<int, 4> d{1, 1, 1, 1};
    int nd = 0;

    Shape() = default;
    Shape(std::initializer_list<int> dims) {
        if (dims.size() < 1 || dims.size() > 4)
            throw ShapeError("Shape: rank must be 1..4");
        nd = static_cast<int>(dims.size());
        int i = 0;
        for (int v : dims) {
            if (v <= 0)
                throw ShapeError("Shape: dimensions must be positive");
            d[i++] = v;
        }
        for (; i < 4; ++i)
            d[i] = 1;
    }

    int operator[](int i) const { return d[i]; }
    bool operator==(const Shape& o) const { return nd == o.nd && d == o.d; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::size_t numel() const {
        std::size_t n = 1;
        for (int i = 0; i < nd; ++i)
            n *= static_cast<std::size_t>(d[i]);
        return nd == 0 ? 0 : n;
    }

    std::string str() const {
        std::string s = "(";
        for (int i = 0; i < nd; ++i)
            s += (i ? "," : "") + std::to_string(d[i]);
        return s + ")";
    }
};

// Dense value container. The scalar type is a template parameter so the same
// operator code runs in double for numerical checks and float for training.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), data(s.numel(), T(0)) {}

    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor full(Shape s, T v) {
        Tensor t(s);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor scalar(T v) {
        Tensor t(Shape{1});
        t.data[0] = v;
        return t;
    }

    std::size_t numel() const { return data.size(); }
    bool defined() const { return !data.empty(); }

    // Rank-4 accessors; callers index lower-rank tensors through data[].
    T& at(int n, int c, int h, int w) {
        return data[((static_cast<std::size_t>(n) * shape.d[1] + c) * shape.d[2] + h) * shape.d[3] + w];
    }
    T at(int n, int c, int h, int w) const {
        return data[((static_cast<std::size_t>(n) * shape.d[1] + c) * shape.d[2] + h) * shape.d[3] + w];
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

} // namespace evsr
