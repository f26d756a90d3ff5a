#pragma once

// Direct-summation convolution references. Written as the obvious nested
// loops over the formula, with no shared code with the library kernels.

#include "evsr/tensor.hpp"

namespace refimpl {

inline evsr::Tensor<double> naive_conv2d(const evsr::Tensor<double>& x,
                                         const evsr::Tensor<double>& w,
                                         const evsr::Tensor<double>* b, int stride, int pad) {
    const int N = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int Co = w.shape[0], KH = w.shape[2], KW = w.shape[3];
    const int Ho = (H + 2 * pad - KH) / stride + 1;
    const int Wo = (W + 2 * pad - KW) / stride + 1;
    evsr::Tensor<double> y(evsr::Shape{N, Co, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    double acc = b ? b->data[co] : 0.0;
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int ih = ho * stride - pad + kh;
                                const int iw = wo * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W)
                                    continue;
                                acc += x.at(n, ci, ih, iw) * w.at(co, ci, kh, kw);
                            }
                    y.at(n, co, ho, wo) = acc;
                }
    return y;
}

// Scatter form of the transposed convolution: every input cell distributes
// its value through the kernel onto the output grid.
inline evsr::Tensor<double> naive_conv_transpose2d(const evsr::Tensor<double>& x,
                                                   const evsr::Tensor<double>& w,
                                                   const evsr::Tensor<double>* b, int stride,
                                                   int pad) {
    const int N = x.shape[0], Co = x.shape[1], Ho = x.shape[2], Wo = x.shape[3];
    const int Ci = w.shape[1], KH = w.shape[2], KW = w.shape[3];
    const int H = (Ho - 1) * stride - 2 * pad + KH;
    const int W = (Wo - 1) * stride - 2 * pad + KW;
    evsr::Tensor<double> y(evsr::Shape{N, Ci, H, W});
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    const double v = x.at(n, co, ho, wo);
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int oh = ho * stride - pad + kh;
                                const int ow = wo * stride - pad + kw;
                                if (oh < 0 || oh >= H || ow < 0 || ow >= W)
                                    continue;
                                y.at(n, ci, oh, ow) += v * w.at(co, ci, kh, kw);
                            }
                }
        if (b)
            for (int ci = 0; ci < Ci; ++ci)
                for (int h = 0; h < H; ++h)
                    for (int ww = 0; ww < W; ++ww)
                        y.at(n, ci, h, ww) += b->data[ci];
    }
    return y;
}

} // namespace refimpl
