#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "evsr/autograd.hpp"
#include "evsr/common.hpp"
#include "evsr/layers.hpp"

namespace evsr {

// Frozen random conv stack standing in for a pretrained perceptual encoder:
// 3 layers (16, 32, 64 filters, k=3, stride 2, pad 1, PReLU 0.25). Weights
// draw once from a fixed published seed, so every build and run scores
// images identically. Channel weights w_l default to ones and may be
// reconfigured (coefficients must stay >= 0).
template <typename T>
struct FeatureEncoder {
    static constexpr std::uint64_t kSeed = 0x45325352ULL;
    static constexpr int kMinSize = 16; // receptive minimum per side

    std::vector<ag::Var<T>> weights; // [Co, Ci, 3, 3] constants
    std::vector<ag::Var<T>> biases;  // [Co] constants
    ag::Var<T> slope;                // shared fixed PReLU slope
    std::vector<std::vector<T>> channel_weights; // w_l per layer

    FeatureEncoder() {
        std::mt19937_64 rng(kSeed);
        std::normal_distribution<double> bias_dist(0.0, 0.05);
        int in_ch = 1;
        for (int out_ch : {16, 32, 64}) {
            weights.push_back(ag::constant(
                nn::kaiming_normal<T>(rng, Shape{out_ch, in_ch, 3, 3}, in_ch * 9)));
            Tensor<T> b = Tensor<T>::zeros(Shape{out_ch});
            for (auto& v : b.data) v = static_cast<T>(bias_dist(rng));
            biases.push_back(ag::constant(std::move(b)));
            channel_weights.push_back(std::vector<T>(out_ch, T(1)));
            in_ch = out_ch;
        }
        slope = ag::constant(Tensor<T>::scalar(T(0.25)));
    }

    // Per-layer feature maps of a (1, 1, h, w) image tensor.
    std::vector<ag::Var<T>> features(const ag::Var<T>& x) const {
        std::vector<ag::Var<T>> out;
        ag::Var<T> h = x;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            h = ag::prelu(ag::conv2d(h, weights[l], biases[l], 2, 1), slope);
            out.push_back(h);
        }
        return out;
    }
};

// Mean absolute difference.
template <typename T>
ag::Var<T> l1_loss(const ag::Var<T>& o, const ag::Var<T>& g) {
    return ag::mean_all(ag::abs(ag::sub(o, g)));
}

// Perceptual distance: per layer, unit-normalize features along channels at
// every site, difference, scale channels by w_l, square, sum channels, take
// the spatial mean, and sum the layers.
template <typename T>
ag::Var<T> lpips_loss(const ag::Var<T>& o, const ag::Var<T>& g, const FeatureEncoder<T>& encoder) {
    const Shape& s = o->value.shape;
    if (s.nd != 4 || s.d[1] != 1)
        throw ShapeError("lpips: expected (n, 1, h, w), got " + s.str());
    if (!(s == g->value.shape))
        throw ShapeError("lpips: shape mismatch " + s.str() + " vs " + g->value.shape.str());
    if (s.d[2] < FeatureEncoder<T>::kMinSize || s.d[3] < FeatureEncoder<T>::kMinSize)
        throw Error("lpips: image must be at least 16x16, got " + std::to_string(s.d[3]) + "x" +
                    std::to_string(s.d[2]));

    const std::vector<ag::Var<T>> fo = encoder.features(o);
    const std::vector<ag::Var<T>> fg = encoder.features(g);
    ag::Var<T> total;
    for (std::size_t l = 0; l < fo.size(); ++l) {
        const ag::Var<T> diff = ag::scale_channels(
            ag::sub(ag::channel_l2_normalize(fo[l]), ag::channel_l2_normalize(fg[l])),
            encoder.channel_weights[l]);
        const Shape& fs = diff->value.shape;
        const T inv_sites = T(1) / (T(fs.d[0]) * T(fs.d[2]) * T(fs.d[3]));
        const ag::Var<T> layer = ag::mul_scalar(ag::sum_all(ag::square(diff)), inv_sites);
        total = total ? ag::add(total, layer) : layer;
    }
    return total;
}

template <typename T>
struct LossValue {
    ag::Var<T> l1;
    ag::Var<T> lpips; // null when lambda == 0 (term skipped entirely)
    ag::Var<T> total;
    double lambda = 0.0;
};

// total = l1 + lambda * lpips; a zero lambda short-circuits to the plain l1
// node so the perceptual stack never runs.
template <typename T>
LossValue<T> sim_loss(const ag::Var<T>& o, const ag::Var<T>& g, const FeatureEncoder<T>& encoder,
                      double lambda = 0.01) {
    if (lambda < 0.0) throw Error("sim_loss: lambda must be >= 0");
    LossValue<T> loss;
    loss.lambda = lambda;
    loss.l1 = l1_loss(o, g);
    if (lambda == 0.0) {
        loss.total = loss.l1;
        return loss;
    }
    loss.lpips = lpips_loss(o, g, encoder);
    loss.total = ag::add(loss.l1, ag::mul_scalar(loss.lpips, static_cast<T>(lambda)));
    return loss;
}

} // namespace evsr
