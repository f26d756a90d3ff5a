#pragma once

// Straight-line perceptual-distance reference: plain nested loops over
// materialized feature planes, no graph machinery. Weights are copied out of
// the production encoder so both paths score with identical filters.

#include <cmath>
#include <cstddef>
#include <vector>

#include "evsr/loss.hpp"
#include "evsr/tensor.hpp"

namespace refimpl {

struct PlaneStack {
    int c = 0, h = 0, w = 0;
    std::vector<double> v; // c * h * w
    double& at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
};

inline PlaneStack conv_s2_p1(const PlaneStack& in, const evsr::Tensor<double>& weight,
                             const evsr::Tensor<double>& bias) {
    const int co = weight.shape.d[0], ci = weight.shape.d[1];
    PlaneStack out;
    out.c = co;
    out.h = (in.h + 2 - 3) / 2 + 1;
    out.w = (in.w + 2 - 3) / 2 + 1;
    out.v.assign(static_cast<std::size_t>(out.c) * out.h * out.w, 0.0);
    for (int oc = 0; oc < co; ++oc)
        for (int oy = 0; oy < out.h; ++oy)
            for (int ox = 0; ox < out.w; ++ox) {
                double acc = bias.data[oc];
                for (int ic = 0; ic < ci; ++ic)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * 2 + ky - 1, ix = ox * 2 + kx - 1;
                            if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                            acc += in.at(ic, iy, ix) * weight.at(oc, ic, ky, kx);
                        }
                out.at(oc, oy, ox) = acc;
            }
    return out;
}

inline void prelu_inplace(PlaneStack& p, double slope) {
    for (double& x : p.v)
        if (x < 0.0) x *= slope;
}

inline std::vector<PlaneStack> encode(const evsr::FeatureEncoder<double>& enc,
                                      const evsr::Tensor<double>& img) {
    PlaneStack cur;
    cur.c = 1;
    cur.h = img.shape.d[2];
    cur.w = img.shape.d[3];
    cur.v.assign(img.data.begin(), img.data.end());
    std::vector<PlaneStack> feats;
    for (std::size_t l = 0; l < enc.weights.size(); ++l) {
        cur = conv_s2_p1(cur, enc.weights[l]->value, enc.biases[l]->value);
        prelu_inplace(cur, enc.slope->value.data[0]);
        feats.push_back(cur);
    }
    return feats;
}

inline double naive_lpips(const evsr::FeatureEncoder<double>& enc,
                          const evsr::Tensor<double>& a, const evsr::Tensor<double>& b) {
    const std::vector<PlaneStack> fa = encode(enc, a);
    const std::vector<PlaneStack> fb = encode(enc, b);
    double total = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const PlaneStack& pa = fa[l];
        const PlaneStack& pb = fb[l];
        double layer = 0.0;
        for (int y = 0; y < pa.h; ++y)
            for (int x = 0; x < pa.w; ++x) {
                double na = 0.0, nb = 0.0;
                for (int c = 0; c < pa.c; ++c) {
                    na += pa.at(c, y, x) * pa.at(c, y, x);
                    nb += pb.at(c, y, x) * pb.at(c, y, x);
                }
                na = std::sqrt(na + 1e-30);
                nb = std::sqrt(nb + 1e-30);
                for (int c = 0; c < pa.c; ++c) {
                    const double d =
                        enc.channel_weights[l][c] * (pa.at(c, y, x) / na - pb.at(c, y, x) / nb);
                    layer += d * d;
                }
            }
        total += layer / (static_cast<double>(pa.h) * pa.w);
    }
    return total;
}

} // namespace refimpl
