#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "evsr/autograd.hpp"
#include "evsr/common.hpp"

namespace evsr::nn {

// Ordered, named registry of trainable tensors. Registration order is
// construction order, which fixes optimizer iteration and file layout.
template <typename T>
class ParamStore {
public:
    ag::Var<T> add(const std::string& name, ag::Var<T> var) {
        for (const auto& [n, v] : entries_)
            if (n == name) throw Error("parameter registered twice: " + name);
        entries_.emplace_back(name, var);
        return var;
    }

    const ag::Var<T>* find(const std::string& name) const {
        for (const auto& [n, v] : entries_)
            if (n == name) return &v;
        return nullptr;
    }

    std::vector<ag::Var<T>> vars() const {
        std::vector<ag::Var<T>> out;
        out.reserve(entries_.size());
        for (const auto& [n, v] : entries_) out.push_back(v);
        return out;
    }

    const std::vector<std::pair<std::string, ag::Var<T>>>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<std::pair<std::string, ag::Var<T>>> entries_;
};

// He-style normal init, std = sqrt(2 / fan_in). Draws go through a double
// distribution so float and double models consume the generator identically.
template <typename T>
Tensor<T> kaiming_normal(std::mt19937_64& rng, const Shape& shape, int fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    Tensor<T> t = Tensor<T>::zeros(shape);
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
    return t;
}

template <typename T>
struct Conv2d {
    ag::Var<T> weight; // [out_ch, in_ch, k, k]
    ag::Var<T> bias;   // [out_ch]
    int stride = 1;
    int pad = 0;

    Conv2d() = default;
    Conv2d(ParamStore<T>& store, const std::string& name, std::mt19937_64& rng, int in_ch,
           int out_ch, int k, int stride_, int pad_)
        : stride(stride_), pad(pad_) {
        weight = store.add(name + ".weight",
                           ag::parameter(kaiming_normal<T>(rng, Shape{out_ch, in_ch, k, k},
                                                           in_ch * k * k)));
        bias = store.add(name + ".bias", ag::parameter(Tensor<T>::zeros(Shape{out_ch})));
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const {
        return ag::conv2d(x, weight, bias, stride, pad);
    }
};

template <typename T>
struct ConvTranspose2d {
    ag::Var<T> weight; // [in_ch, out_ch, k, k]
    ag::Var<T> bias;   // [out_ch]
    int stride = 1;
    int pad = 0;

    ConvTranspose2d() = default;
    ConvTranspose2d(ParamStore<T>& store, const std::string& name, std::mt19937_64& rng, int in_ch,
                    int out_ch, int k, int stride_, int pad_)
        : stride(stride_), pad(pad_) {
        weight = store.add(name + ".weight",
                           ag::parameter(kaiming_normal<T>(rng, Shape{in_ch, out_ch, k, k},
                                                           in_ch * k * k)));
        bias = store.add(name + ".bias", ag::parameter(Tensor<T>::zeros(Shape{out_ch})));
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const {
        return ag::conv_transpose2d(x, weight, bias, stride, pad);
    }
};

// Parametric ReLU with one learnable slope shared across channels.
template <typename T>
struct PReLU {
    ag::Var<T> slope;

    PReLU() = default;
    PReLU(ParamStore<T>& store, const std::string& name, T init = T(0.25)) {
        slope = store.add(name + ".slope", ag::parameter(Tensor<T>::scalar(init)));
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const { return ag::prelu(x, slope); }
};

// conv(3x3) -> PReLU -> conv(3x3) with an identity skip. The closing conv
// starts at zero so every block is the identity at construction: deep trunks
// stay variance-neutral at any depth and the branches fade in as they train.
// The generator is still consumed for the zeroed draw, keeping all later
// draws independent of this choice.
template <typename T>
struct ResBlock {
    Conv2d<T> conv1, conv2;
    PReLU<T> act;

    ResBlock() = default;
    ResBlock(ParamStore<T>& store, const std::string& name, std::mt19937_64& rng, int channels)
        : conv1(store, name + ".conv1", rng, channels, channels, 3, 1, 1),
          conv2(store, name + ".conv2", rng, channels, channels, 3, 1, 1),
          act(store, name + ".act") {
        std::fill(conv2.weight->value.data.begin(), conv2.weight->value.data.end(), T(0));
    }

    ag::Var<T> operator()(const ag::Var<T>& x) const {
        return ag::add(conv2(act(conv1(x))), x);
    }
};

} // namespace evsr::nn
