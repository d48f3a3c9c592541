#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vcqe/autodiff.hpp"
#include "vcqe/rng.hpp"

namespace vcqe::testing {

struct GradCheckResult {
    double max_rel = 0.0;
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
    std::string worst_leaf;
    std::int64_t worst_coord = -1;
    int coords_checked = 0;
};

// Compares analytic gradients of a scalar-valued graph against central
// finite differences. `fn` must rebuild the graph from the given leaves so
// perturbations of leaf values take effect. When max_coords_per_leaf > 0,
// a random subset of coordinates is probed per leaf.
template <typename T>
GradCheckResult grad_check(const std::function<Var<T>()>& fn,
                           std::vector<std::pair<std::string, Var<T>>> leaves, double h = 1e-4,
                           int max_coords_per_leaf = 0, Rng* rng = nullptr) {
    for (auto& [name, v] : leaves) {
        v.zero_grad();
        v.set_requires_grad(true);
    }
    Var<T> out = fn();
    backward(out);

    GradCheckResult res;
    for (auto& [name, v] : leaves) {
        Tensor<T> agrad = v.has_grad() ? v.grad() : Tensor<T>(v.value().dims());
        const std::int64_t n = v.numel();
        std::vector<std::int64_t> coords;
        if (max_coords_per_leaf > 0 && n > max_coords_per_leaf && rng) {
            for (int i = 0; i < max_coords_per_leaf; ++i)
                coords.push_back(rng->uniform_int(static_cast<int>(n)));
        } else {
            for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
        }
        for (std::int64_t ci : coords) {
            const T orig = v.mutable_value()[ci];
            double fp, fm;
            {
                NoGradGuard ng;
                v.mutable_value()[ci] = orig + static_cast<T>(h);
                fp = static_cast<double>(fn().value()[0]);
                v.mutable_value()[ci] = orig - static_cast<T>(h);
                fm = static_cast<double>(fn().value()[0]);
            }
            v.mutable_value()[ci] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = static_cast<double>(agrad[ci]);
            const double denom = std::max(std::abs(an), std::abs(fd));
            const double rel = denom > 1e-7 ? std::abs(an - fd) / denom : std::abs(an - fd);
            ++res.coords_checked;
            if (rel > res.max_rel) {
                res.max_rel = rel;
                res.worst_analytic = an;
                res.worst_fd = fd;
                res.worst_leaf = name;
                res.worst_coord = ci;
            }
        }
    }
    return res;
}

template <typename T>
Tensor<T> random_tensor(std::vector<int> dims, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor<T> t(std::move(dims));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

}  // namespace vcqe::testing
