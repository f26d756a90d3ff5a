#pragma once

// Central finite-difference verification of analytic gradients. Runs in
// double; the forward callable must rebuild its graph from the current leaf
// values on every invocation.

#include <random>
#include <vector>

#include "evsr/autograd.hpp"

namespace evsr::ag {

struct GradCheckConfig {
    double eps = 1e-5;
    int coords_per_tensor = 50; // sampled coordinates; small tensors get all
    std::uint64_t seed = 0xC0FFEE;
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};

// Relative error with a unit floor so tiny gradients compare absolutely.
inline double rel_err(double a, double b) {
    double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

template <typename Forward>
GradCheckResult grad_check(Forward&& forward, const std::vector<Var<double>>& params,
                           const GradCheckConfig& cfg = {}) {
    zero_grad(params);
    Var<double> loss = forward();
    backward(loss);

    std::vector<Tensor<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params)
        analytic.push_back(p->grad.defined() ? p->grad : Tensor<double>::zeros(p->value.shape));

    GradCheckResult res;
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        const std::size_t n = p->value.numel();
        std::vector<std::size_t> coords;
        if (n <= static_cast<std::size_t>(cfg.coords_per_tensor)) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                coords[i] = i;
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (int i = 0; i < cfg.coords_per_tensor; ++i)
                coords.push_back(pick(rng));
        }
        for (std::size_t c : coords) {
            const double orig = p->value.data[c];
            p->value.data[c] = orig + cfg.eps;
            const double f_plus = forward()->value.data[0];
            p->value.data[c] = orig - cfg.eps;
            const double f_minus = forward()->value.data[0];
            p->value.data[c] = orig;
            const double numeric = (f_plus - f_minus) / (2.0 * cfg.eps);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(numeric, analytic[pi].data[c]));
            ++res.coords_checked;
        }
    }
    return res;
}

} // namespace evsr::ag
