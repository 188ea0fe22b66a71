#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "caum/tensor.hpp"

namespace caum::testing {

inline void fill_random(Tensor& t, std::mt19937_64& rng, double sd = 0.5) {
    std::normal_distribution<double> g(0.0, sd);
    for (double& v : t.values()) v = g(rng);
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            bool requires_grad = true, double sd = 0.5) {
    Tensor t = Tensor::zeros(rows, cols, requires_grad);
    fill_random(t, rng, sd);
    return t;
}

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// Central finite differences against the reverse-mode gradient of every
// coordinate of every leaf. make_loss() must rebuild the graph from the
// leaves' current values. Coordinates whose analytic gradient is below
// `floor` are skipped (the relative error is meaningless there).
inline FdReport fd_check(const std::function<Tensor()>& make_loss,
                         std::vector<Tensor> leaves, double eps = 1e-6,
                         double floor = 1e-8) {
    for (auto& l : leaves) l.zero_grad();
    Tensor loss = make_loss();
    backward(loss);

    FdReport rep;
    for (auto& leaf : leaves) {
        const std::vector<double> analytic = leaf.grad();
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            double& x = leaf.values()[i];
            const double saved = x;
            x = saved + eps;
            const double up = make_loss().item();
            x = saved - eps;
            const double down = make_loss().item();
            x = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double an = analytic.empty() ? 0.0 : analytic[i];
            if (std::abs(an) <= floor && std::abs(fd) <= floor) continue;
            const double rel = std::abs(fd - an) /
                               std::max({std::abs(an), std::abs(fd), floor});
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            ++rep.checked;
        }
    }
    return rep;
}

// Fourth-order five-point stencil, for losses whose gradients span many
// orders of magnitude.
inline FdReport fd_check5(const std::function<Tensor()>& make_loss,
                          std::vector<Tensor> leaves, double eps = 1e-3,
                          double floor = 1e-8) {
    for (auto& l : leaves) l.zero_grad();
    Tensor loss = make_loss();
    backward(loss);

    FdReport rep;
    for (auto& leaf : leaves) {
        const std::vector<double> analytic = leaf.grad();
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            double& x = leaf.values()[i];
            const double saved = x;
            auto eval = [&](double delta) {
                x = saved + delta;
                const double v = make_loss().item();
                x = saved;
                return v;
            };
            const double fd = (-eval(2 * eps) + 8 * eval(eps) - 8 * eval(-eps) +
                               eval(-2 * eps)) /
                              (12.0 * eps);
            const double an = analytic.empty() ? 0.0 : analytic[i];
            if (std::abs(an) <= floor && std::abs(fd) <= floor) continue;
            const double rel = std::abs(fd - an) /
                               std::max({std::abs(an), std::abs(fd), floor});
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            ++rep.checked;
        }
    }
    return rep;
}

} // namespace caum::testing
