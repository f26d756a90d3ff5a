#pragma once

// Reverse-mode automatic differentiation on dense tensors. The operator set
// is closed and small: conv2d, conv_transpose2d, elementwise add/sub,
// scalar multiply, prelu, channel concatenation, full reductions (mean, sum),
// abs, square, per-site channel L2 normalization and fixed channel scaling.
// Graphs are built define-by-run; backward walks nodes in descending
// creation order, which fixes the accumulation order and keeps gradients
// bit-reproducible for a given build.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "evsr/tensor.hpp"

namespace evsr::ag {

// When set, every freshly created node's value is scanned for NaN/inf.
inline bool& check_finite() {
    static bool flag = false;
    return flag;
}

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad; // allocated on first accumulation
    std::vector<std::shared_ptr<Node<T>>> inputs;
    std::function<void(Node<T>&)> backward_fn;
    bool requires_grad = false;
    std::uint64_t id = 0;

    // Zero-initialized gradient buffer matching the value's shape.
    Tensor<T>& grad_buf() {
        if (!grad.defined())
            grad = Tensor<T>::zeros(value.shape);
        return grad;
    }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

namespace detail {

inline std::uint64_t next_node_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

template <typename T>
void assert_finite(const Tensor<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(static_cast<double>(v)))
            throw Error("autograd: non-finite value produced");
}

} // namespace detail

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = detail::next_node_id();
    return n;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
    return make_leaf(std::move(value), false);
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
    return make_leaf(std::move(value), true);
}

template <typename T, typename Backward>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, Backward&& backward) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs)
        if (in && in->requires_grad)
            n->requires_grad = true;
    if (n->requires_grad)
        n->backward_fn = std::forward<Backward>(backward);
    n->id = detail::next_node_id();
    if (check_finite())
        detail::assert_finite(n->value);
    return n;
}

// ---------------------------------------------------------------------------
// dense kernels shared by the convolution ops

namespace detail {

// C[m x n] += A[m x k] * B[k x n], all row-major.
template <typename T>
void gemm_nn(int m, int k, int n, const T* A, const T* B, T* C) {
    for (int i = 0; i < m; ++i) {
        T* c = C + static_cast<std::size_t>(i) * n;
        const T* a = A + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T s = a[p];
            if (s == T(0))
                continue;
            const T* b = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j)
                c[j] += s * b[j];
        }
    }
}

// C[m x n] += A[k x m]^T * B[k x n].
template <typename T>
void gemm_tn(int k, int m, int n, const T* A, const T* B, T* C) {
    for (int p = 0; p < k; ++p) {
        const T* a = A + static_cast<std::size_t>(p) * m;
        const T* b = B + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const T s = a[i];
            if (s == T(0))
                continue;
            T* c = C + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j)
                c[j] += s * b[j];
        }
    }
}

// C[m x p] += A[m x n] * B[p x n]^T. Dot products run over the contiguous
// axis with eight independent accumulators; the summation tree is fixed, so
// results stay reproducible while still vectorizing.
template <typename T>
void gemm_nt(int m, int n, int p, const T* A, const T* B, T* C) {
    for (int i = 0; i < m; ++i) {
        const T* a = A + static_cast<std::size_t>(i) * n;
        for (int r = 0; r < p; ++r) {
            const T* b = B + static_cast<std::size_t>(r) * n;
            T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
            T acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                acc0 += a[j] * b[j];
                acc1 += a[j + 1] * b[j + 1];
                acc2 += a[j + 2] * b[j + 2];
                acc3 += a[j + 3] * b[j + 3];
                acc4 += a[j + 4] * b[j + 4];
                acc5 += a[j + 5] * b[j + 5];
                acc6 += a[j + 6] * b[j + 6];
                acc7 += a[j + 7] * b[j + 7];
            }
            T tail = 0;
            for (; j < n; ++j)
                tail += a[j] * b[j];
            C[static_cast<std::size_t>(i) * p + r] +=
                ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7)) + tail;
        }
    }
}

struct ConvDims {
    int ci, h, w;     // input plane
    int kh, kw;       // kernel
    int stride, pad;
    int ho, wo;       // output plane
    int rows() const { return ci * kh * kw; }
    int cols() const { return ho * wo; }
};

// Unrolls one (ci, h, w) plane into a (ci*kh*kw) x (ho*wo) matrix; positions
// outside the padded input contribute zeros.
template <typename T>
void im2col(const ConvDims& d, const T* src, T* dst) {
    for (int ci = 0; ci < d.ci; ++ci) {
        const T* plane = src + static_cast<std::size_t>(ci) * d.h * d.w;
        for (int kh = 0; kh < d.kh; ++kh) {
            for (int kw = 0; kw < d.kw; ++kw) {
                for (int ho = 0; ho < d.ho; ++ho) {
                    const int ih = ho * d.stride - d.pad + kh;
                    T* out_row = dst + (((static_cast<std::size_t>(ci) * d.kh + kh) * d.kw + kw) *
                                            d.ho +
                                        ho) *
                                           d.wo;
                    if (ih < 0 || ih >= d.h) {
                        std::fill(out_row, out_row + d.wo, T(0));
                        continue;
                    }
                    const T* in_row = plane + static_cast<std::size_t>(ih) * d.w;
                    for (int wo = 0; wo < d.wo; ++wo) {
                        const int iw = wo * d.stride - d.pad + kw;
                        out_row[wo] = (iw >= 0 && iw < d.w) ? in_row[iw] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const ConvDims& d, const T* src, T* dst) {
    for (int ci = 0; ci < d.ci; ++ci) {
        T* plane = dst + static_cast<std::size_t>(ci) * d.h * d.w;
        for (int kh = 0; kh < d.kh; ++kh) {
            for (int kw = 0; kw < d.kw; ++kw) {
                for (int ho = 0; ho < d.ho; ++ho) {
                    const int ih = ho * d.stride - d.pad + kh;
                    if (ih < 0 || ih >= d.h)
                        continue;
                    const T* in_row = src + (((static_cast<std::size_t>(ci) * d.kh + kh) * d.kw +
                                              kw) *
                                                 d.ho +
                                             ho) *
                                                d.wo;
                    T* out_row = plane + static_cast<std::size_t>(ih) * d.w;
                    for (int wo = 0; wo < d.wo; ++wo) {
                        const int iw = wo * d.stride - d.pad + kw;
                        if (iw >= 0 && iw < d.w)
                            out_row[iw] += in_row[wo];
                    }
                }
            }
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// elementwise and structural ops

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a->value.shape != b->value.shape)
        throw ShapeError("add: shapes " + a->value.shape.str() + " vs " + b->value.shape.str());
    Tensor<T> out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += b->value.data[i];
    return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
        for (int k = 0; k < 2; ++k) {
            auto& in = self.inputs[k];
            if (!in->requires_grad)
                continue;
            auto& g = in->grad_buf();
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] += self.grad.data[i];
        }
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    if (a->value.shape != b->value.shape)
        throw ShapeError("sub: shapes " + a->value.shape.str() + " vs " + b->value.shape.str());
    Tensor<T> out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] -= b->value.data[i];
    return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
        if (self.inputs[0]->requires_grad) {
            auto& g = self.inputs[0]->grad_buf();
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] += self.grad.data[i];
        }
        if (self.inputs[1]->requires_grad) {
            auto& g = self.inputs[1]->grad_buf();
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] -= self.grad.data[i];
        }
    });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
    Tensor<T> out = a->value;
    for (T& v : out.data)
        v *= s;
    return make_op<T>(std::move(out), {a}, [s](Node<T>& self) {
        auto& g = self.inputs[0]->grad_buf();
        for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] += s * self.grad.data[i];
    });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
    Tensor<T> out = a->value;
    for (T& v : out.data)
        v = std::abs(v);
    return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
        const auto& x = self.inputs[0]->value;
        auto& g = self.inputs[0]->grad_buf();
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const T s = x.data[i] > T(0) ? T(1) : (x.data[i] < T(0) ? T(-1) : T(0));
            g.data[i] += s * self.grad.data[i];
        }
    });
}

template <typename T>
Var<T> square(const Var<T>& a) {
    Tensor<T> out = a->value;
    for (T& v : out.data)
        v *= v;
    return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
        const auto& x = self.inputs[0]->value;
        auto& g = self.inputs[0]->grad_buf();
        for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] += T(2) * x.data[i] * self.grad.data[i];
    });
}

// Parametric ReLU with one learnable slope for the whole layer.
template <typename T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope) {
    if (slope->value.numel() != 1)
        throw ShapeError("prelu: slope must be a single scalar");
    const T a = slope->value.data[0];
    Tensor<T> out = x->value;
    for (T& v : out.data)
        if (v < T(0))
            v *= a;
    return make_op<T>(std::move(out), {x, slope}, [a](Node<T>& self) {
        const auto& xin = self.inputs[0]->value;
        if (self.inputs[0]->requires_grad) {
            auto& gx = self.inputs[0]->grad_buf();
            for (std::size_t i = 0; i < gx.data.size(); ++i)
                gx.data[i] += (xin.data[i] >= T(0) ? T(1) : a) * self.grad.data[i];
        }
        if (self.inputs[1]->requires_grad) {
            T acc = 0;
            for (std::size_t i = 0; i < xin.data.size(); ++i)
                if (xin.data[i] < T(0))
                    acc += xin.data[i] * self.grad.data[i];
            self.inputs[1]->grad_buf().data[0] += acc;
        }
    });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
    if (parts.empty())
        throw ShapeError("concat_channels: no inputs");
    const Shape& s0 = parts[0]->value.shape;
    if (s0.nd != 4)
        throw ShapeError("concat_channels: expects rank-4 tensors");
    int channels = 0;
    for (const auto& p : parts) {
        const Shape& s = p->value.shape;
        if (s.nd != 4 || s.d[0] != s0.d[0] || s.d[2] != s0.d[2] || s.d[3] != s0.d[3])
            throw ShapeError("concat_channels: incompatible shape " + s.str());
        channels += s.d[1];
    }
    Tensor<T> out(Shape{s0.d[0], channels, s0.d[2], s0.d[3]});
    const std::size_t plane = static_cast<std::size_t>(s0.d[2]) * s0.d[3];
    for (int n = 0; n < s0.d[0]; ++n) {
        std::size_t c_off = 0;
        for (const auto& p : parts) {
            const int pc = p->value.shape.d[1];
            const T* src = p->value.data.data() + static_cast<std::size_t>(n) * pc * plane;
            T* dst = out.data.data() +
                     (static_cast<std::size_t>(n) * channels + c_off) * plane;
            std::copy(src, src + static_cast<std::size_t>(pc) * plane, dst);
            c_off += pc;
        }
    }
    return make_op<T>(std::move(out), std::vector<Var<T>>(parts), [plane](Node<T>& self) {
        const Shape& so = self.value.shape;
        for (int n = 0; n < so.d[0]; ++n) {
            std::size_t c_off = 0;
            for (auto& in : self.inputs) {
                const int pc = in->value.shape.d[1];
                if (in->requires_grad) {
                    T* dst = in->grad_buf().data.data() +
                             static_cast<std::size_t>(n) * pc * plane;
                    const T* src = self.grad.data.data() +
                                   (static_cast<std::size_t>(n) * so.d[1] + c_off) * plane;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(pc) * plane; ++i)
                        dst[i] += src[i];
                }
                c_off += pc;
            }
        }
    });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
    T acc = 0;
    for (T v : a->value.data)
        acc += v;
    return make_op<T>(Tensor<T>::scalar(acc), {a}, [](Node<T>& self) {
        const T g = self.grad.data[0];
        auto& gx = self.inputs[0]->grad_buf();
        for (T& v : gx.data)
            v += g;
    });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
    const T inv = T(1) / static_cast<T>(a->value.numel());
    T acc = 0;
    for (T v : a->value.data)
        acc += v;
    return make_op<T>(Tensor<T>::scalar(acc * inv), {a}, [inv](Node<T>& self) {
        const T g = self.grad.data[0] * inv;
        auto& gx = self.inputs[0]->grad_buf();
        for (T& v : gx.data)
            v += g;
    });
}

// Unit L2 normalization along the channel axis at every spatial site:
// y_c = x_c / sqrt(sum_k x_k^2 + eps). The backward pass applies the exact
// quotient rule, g_xc = (g_c - y_c * sum_k g_k y_k) / norm.
template <typename T>
Var<T> channel_l2_normalize(const Var<T>& x, T eps = T(1e-30)) {
    const Shape& s = x->value.shape;
    if (s.nd != 4)
        throw ShapeError("channel_l2_normalize: expects rank-4 tensor");
    const int N = s.d[0], C = s.d[1], H = s.d[2], W = s.d[3];
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor<T> out(s);
    for (int n = 0; n < N; ++n) {
        const T* xin = x->value.data.data() + static_cast<std::size_t>(n) * C * plane;
        T* yout = out.data.data() + static_cast<std::size_t>(n) * C * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            T sq = 0;
            for (int c = 0; c < C; ++c) {
                const T v = xin[c * plane + p];
                sq += v * v;
            }
            const T norm = std::sqrt(sq + eps);
            for (int c = 0; c < C; ++c)
                yout[c * plane + p] = xin[c * plane + p] / norm;
        }
    }
    return make_op<T>(std::move(out), {x}, [eps, plane](Node<T>& self) {
        const Shape& s = self.value.shape;
        const int N = s.d[0], C = s.d[1];
        const auto& xin = self.inputs[0]->value;
        auto& gx = self.inputs[0]->grad_buf();
        for (int n = 0; n < N; ++n) {
            const std::size_t base = static_cast<std::size_t>(n) * C * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                T sq = 0;
                for (int c = 0; c < C; ++c) {
                    const T v = xin.data[base + c * plane + p];
                    sq += v * v;
                }
                const T norm = std::sqrt(sq + eps);
                T dot = 0; // sum_k g_k y_k
                for (int c = 0; c < C; ++c)
                    dot += self.grad.data[base + c * plane + p] *
                           self.value.data[base + c * plane + p];
                for (int c = 0; c < C; ++c) {
                    const std::size_t i = base + c * plane + p;
                    gx.data[i] += (self.grad.data[i] - self.value.data[i] * dot) / norm;
                }
            }
        }
    });
}

// Multiplies every channel by a fixed non-learnable weight.
template <typename T>
Var<T> scale_channels(const Var<T>& x, std::vector<T> weights) {
    const Shape& s = x->value.shape;
    if (s.nd != 4 || static_cast<int>(weights.size()) != s.d[1])
        throw ShapeError("scale_channels: need one weight per channel");
    const std::size_t plane = static_cast<std::size_t>(s.d[2]) * s.d[3];
    Tensor<T> out = x->value;
    for (int n = 0; n < s.d[0]; ++n)
        for (int c = 0; c < s.d[1]; ++c) {
            T* p = out.data.data() + (static_cast<std::size_t>(n) * s.d[1] + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                p[i] *= weights[c];
        }
    return make_op<T>(std::move(out), {x}, [w = std::move(weights), plane](Node<T>& self) {
        const Shape& s = self.value.shape;
        auto& gx = self.inputs[0]->grad_buf();
        for (int n = 0; n < s.d[0]; ++n)
            for (int c = 0; c < s.d[1]; ++c) {
                const std::size_t off = (static_cast<std::size_t>(n) * s.d[1] + c) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    gx.data[off + i] += w[c] * self.grad.data[off + i];
            }
    });
}

// ---------------------------------------------------------------------------
// convolutions

// Cross-correlation with zero padding. x: (n, ci, h, w), weight:
// (co, ci, kh, kw), bias: (co) or null. Output height is
// (h + 2*pad - kh) / stride + 1, floored.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
    const Shape& xs = x->value.shape;
    const Shape& ws = weight->value.shape;
    if (xs.nd != 4 || ws.nd != 4)
        throw ShapeError("conv2d: x and weight must be rank 4");
    if (xs.d[1] != ws.d[1])
        throw ShapeError("conv2d: channel mismatch " + xs.str() + " vs " + ws.str());
    if (bias && (bias->value.shape.nd != 1 || bias->value.shape.d[0] != ws.d[0]))
        throw ShapeError("conv2d: bias must have one entry per output channel");
    if (stride < 1 || pad < 0)
        throw ShapeError("conv2d: bad stride or padding");

    detail::ConvDims d;
    d.ci = xs.d[1];
    d.h = xs.d[2];
    d.w = xs.d[3];
    d.kh = ws.d[2];
    d.kw = ws.d[3];
    d.stride = stride;
    d.pad = pad;
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw)
        throw ShapeError("conv2d: kernel larger than padded input");

    const int N = xs.d[0], Co = ws.d[0];
    const std::size_t in_plane = static_cast<std::size_t>(d.ci) * d.h * d.w;
    const std::size_t out_plane = static_cast<std::size_t>(Co) * d.ho * d.wo;

    Tensor<T> out(Shape{N, Co, d.ho, d.wo});
    std::vector<T> col(static_cast<std::size_t>(d.rows()) * d.cols());
    for (int n = 0; n < N; ++n) {
        detail::im2col(d, x->value.data.data() + n * in_plane, col.data());
        T* y = out.data.data() + n * out_plane;
        detail::gemm_nn(Co, d.rows(), d.cols(), weight->value.data.data(), col.data(), y);
        if (bias)
            for (int co = 0; co < Co; ++co) {
                const T b = bias->value.data[co];
                T* row = y + static_cast<std::size_t>(co) * d.cols();
                for (int j = 0; j < d.cols(); ++j)
                    row[j] += b;
            }
    }

    std::vector<Var<T>> inputs = bias ? std::vector<Var<T>>{x, weight, bias}
                                      : std::vector<Var<T>>{x, weight};
    return make_op<T>(std::move(out), std::move(inputs),
                      [d, in_plane, out_plane](Node<T>& self) {
        const auto& x = self.inputs[0];
        const auto& w = self.inputs[1];
        const int N = x->value.shape.d[0];
        const int Co = w->value.shape.d[0];
        std::vector<T> col(static_cast<std::size_t>(d.rows()) * d.cols());
        for (int n = 0; n < N; ++n) {
            const T* gy = self.grad.data.data() + n * out_plane;
            if (x->requires_grad) {
                std::fill(col.begin(), col.end(), T(0));
                detail::gemm_tn(Co, d.rows(), d.cols(), w->value.data.data(), gy, col.data());
                detail::col2im(d, col.data(), x->grad_buf().data.data() + n * in_plane);
            }
            if (w->requires_grad) {
                detail::im2col(d, x->value.data.data() + n * in_plane, col.data());
                detail::gemm_nt(Co, d.cols(), d.rows(), gy, col.data(),
                                w->grad_buf().data.data());
            }
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                auto& gb = self.inputs[2]->grad_buf();
                for (int co = 0; co < Co; ++co) {
                    T acc = 0;
                    const T* row = gy + static_cast<std::size_t>(co) * d.cols();
                    for (int j = 0; j < d.cols(); ++j)
                        acc += row[j];
                    gb.data[co] += acc;
                }
            }
        }
    });
}

// Exact adjoint of conv2d's linear map, plus a bias. x: (n, co, ho, wo),
// weight: (co, ci, kh, kw) as in conv2d, bias: (ci) or null. Output height is
// (ho - 1) * stride - 2*pad + kh. With the same weight tensor,
// <conv2d(x), y> == <x, conv_transpose2d(y)> holds up to rounding.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
                        int pad) {
    const Shape& xs = x->value.shape;
    const Shape& ws = weight->value.shape;
    if (xs.nd != 4 || ws.nd != 4)
        throw ShapeError("conv_transpose2d: x and weight must be rank 4");
    if (xs.d[1] != ws.d[0])
        throw ShapeError("conv_transpose2d: channel mismatch " + xs.str() + " vs " + ws.str());
    const int Ci = ws.d[1];
    if (bias && (bias->value.shape.nd != 1 || bias->value.shape.d[0] != Ci))
        throw ShapeError("conv_transpose2d: bias must have one entry per output channel");
    if (stride < 1 || pad < 0)
        throw ShapeError("conv_transpose2d: bad stride or padding");

    detail::ConvDims d; // dims of the conv this op is the adjoint of
    d.ci = Ci;
    d.kh = ws.d[2];
    d.kw = ws.d[3];
    d.stride = stride;
    d.pad = pad;
    d.ho = xs.d[2];
    d.wo = xs.d[3];
    d.h = (d.ho - 1) * stride - 2 * pad + d.kh;
    d.w = (d.wo - 1) * stride - 2 * pad + d.kw;
    if (d.h < 1 || d.w < 1)
        throw ShapeError("conv_transpose2d: output collapses to nothing");

    const int N = xs.d[0], Co = xs.d[1];
    const std::size_t in_plane = static_cast<std::size_t>(Co) * d.ho * d.wo;
    const std::size_t out_plane = static_cast<std::size_t>(Ci) * d.h * d.w;

    Tensor<T> out(Shape{N, Ci, d.h, d.w});
    std::vector<T> col(static_cast<std::size_t>(d.rows()) * d.cols());
    for (int n = 0; n < N; ++n) {
        std::fill(col.begin(), col.end(), T(0));
        detail::gemm_tn(Co, d.rows(), d.cols(), weight->value.data.data(),
                        x->value.data.data() + n * in_plane, col.data());
        T* y = out.data.data() + n * out_plane;
        detail::col2im(d, col.data(), y);
        if (bias)
            for (int ci = 0; ci < Ci; ++ci) {
                const T b = bias->value.data[ci];
                T* plane_ptr = y + static_cast<std::size_t>(ci) * d.h * d.w;
                for (int j = 0; j < d.h * d.w; ++j)
                    plane_ptr[j] += b;
            }
    }

    std::vector<Var<T>> inputs = bias ? std::vector<Var<T>>{x, weight, bias}
                                      : std::vector<Var<T>>{x, weight};
    return make_op<T>(std::move(out), std::move(inputs),
                      [d, in_plane, out_plane](Node<T>& self) {
        const auto& x = self.inputs[0];
        const auto& w = self.inputs[1];
        const int N = x->value.shape.d[0];
        const int Co = x->value.shape.d[1];
        const int Ci = d.ci;
        std::vector<T> col(static_cast<std::size_t>(d.rows()) * d.cols());
        for (int n = 0; n < N; ++n) {
            const T* gy = self.grad.data.data() + n * out_plane;
            const bool need_col = x->requires_grad || w->requires_grad;
            if (need_col)
                detail::im2col(d, gy, col.data());
            if (x->requires_grad)
                detail::gemm_nn(Co, d.rows(), d.cols(), w->value.data.data(), col.data(),
                                x->grad_buf().data.data() + n * in_plane);
            if (w->requires_grad)
                detail::gemm_nt(Co, d.cols(), d.rows(),
                                x->value.data.data() + n * in_plane, col.data(),
                                w->grad_buf().data.data());
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                auto& gb = self.inputs[2]->grad_buf();
                for (int ci = 0; ci < Ci; ++ci) {
                    T acc = 0;
                    const T* plane_ptr = gy + static_cast<std::size_t>(ci) * d.h * d.w;
                    for (int j = 0; j < d.h * d.w; ++j)
                        acc += plane_ptr[j];
                    gb.data[ci] += acc;
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// backward pass

// Propagates d(loss)/d(node) through every node the scalar loss depends on.
// Nodes run in descending creation order; since inputs always predate their
// consumers, every node's gradient is complete before its backward function
// fires, and the accumulation order is the same on every run.
template <typename T>
void backward(const Var<T>& loss) {
    if (loss->value.numel() != 1)
        throw ShapeError("backward: loss must be a scalar, got " + loss->value.shape.str());
    if (!loss->requires_grad)
        throw Error("backward: loss does not depend on any parameter");

    std::vector<Node<T>*> order;
    std::unordered_set<const Node<T>*> seen;
    std::vector<Node<T>*> stack{loss.get()};
    seen.insert(loss.get());
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& in : n->inputs)
            if (in && in->requires_grad && seen.insert(in.get()).second)
                stack.push_back(in.get());
    }
    std::sort(order.begin(), order.end(),
              [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

    loss->grad_buf().data[0] += T(1);
    for (Node<T>* n : order)
        if (n->backward_fn && n->grad.defined())
            n->backward_fn(*n);
}

template <typename T>
void zero_grad(const std::vector<Var<T>>& params) {
    for (const auto& p : params)
        p->grad = Tensor<T>();
}

// Clamps a plain tensor into [0, 1]; used on emitted images, outside the
// graph, so losses see the unclamped values.
template <typename T>
Tensor<T> clamp01(Tensor<T> t) {
    for (T& v : t.data)
        v = std::clamp(v, T(0), T(1));
    return t;
}

} // namespace evsr::ag
