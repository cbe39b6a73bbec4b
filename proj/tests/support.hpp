// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include "rst/autograd.hpp"

namespace rst::testing {

inline Tensor<double> rand_tensor(const Shape& s, std::uint64_t seed, double lo = -1.0,
                                  double hi = 1.0) {
    Rng rng(seed);
    return Tensor<double>::random_uniform(s, rng, lo, hi);
}

inline Tensor<float> rand_tensor_f(const Shape& s, std::uint64_t seed, float lo = 0.0f,
                                   float hi = 1.0f) {
    Rng rng(seed);
    return Tensor<float>::random_uniform(s, rng, lo, hi);
}

/// Central-difference check of d(loss)/d(leaf) against one backward pass.
/// `loss_fn` must rebuild the scalar loss graph from the leaf's current value.
/// Returns the worst relative error over the sampled coordinates.
inline double grad_check(const std::function<Variable<double>()>& loss_fn,
                         const Variable<double>& leaf, double h = 1e-5, int max_coords = -1,
                         std::uint64_t seed = 17) {
    leaf.zero_grad();
    Variable<double> loss = loss_fn();
    loss.backward();
    const Tensor<double> analytic = leaf.grad();

    std::vector<Eigen::Index> coords;
    const Eigen::Index n = leaf.value().size();
    if (max_coords < 0 || max_coords >= n) {
        for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
        Rng rng(seed);
        for (int i = 0; i < max_coords; ++i) coords.push_back(rng.uniform_int(n));
    }

    double worst = 0.0;
    for (Eigen::Index i : coords) {
        double& slot = leaf.mutable_value().data[i];
        const double orig = slot;
        slot = orig + h;
        const double up = loss_fn().value().data[0];
        slot = orig - h;
        const double down = loss_fn().value().data[0];
        slot = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.data[i];
        const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

/// Scalar probe: weighted sum of an arbitrary-shaped output with fixed
/// coefficients, so every output element influences the loss.
inline Variable<double> probe_scalar(const Variable<double>& out, std::uint64_t seed = 23) {
    Tensor<double> c = rand_tensor(out.shape(), seed, 0.1, 1.0);
    const double n = static_cast<double>(out.value().size());
    return scale(mean_all(mul(out, constant(std::move(c)))), n);
}

/// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::string tmpl = (std::filesystem::temp_directory_path() / (tag + ".XXXXXX")).string();
        if (!mkdtemp(tmpl.data())) throw IoError("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace rst::testing
