#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nanlab/data.hpp"
#include "nanlab/net.hpp"

namespace testutil {

using nanlab::Vector;

// O(n*m) pair-counting AUROC, the oracle for the rank-sum implementation.
inline double auroc_brute(const Vector& id_scores, const Vector& ood_scores) {
    double wins = 0.0;
    for (double si : id_scores)
        for (double so : ood_scores) {
            if (si > so)
                wins += 1.0;
            else if (si == so)
                wins += 0.5;
        }
    return wins / (static_cast<double>(id_scores.size()) *
                   static_cast<double>(ood_scores.size()));
}

// Sweeps every candidate threshold and keeps the largest one with TPR >= 0.95.
inline double fpr95_brute(const Vector& id_scores, const Vector& ood_scores) {
    Vector candidates = id_scores;
    candidates.insert(candidates.end(), ood_scores.begin(), ood_scores.end());
    std::sort(candidates.begin(), candidates.end(), std::greater<double>());
    double best_tau = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (double tau : candidates) {
        std::size_t tp = 0;
        for (double s : id_scores)
            if (s >= tau) ++tp;
        if (static_cast<double>(tp) / static_cast<double>(id_scores.size()) >= 0.95) {
            if (!found || tau > best_tau) best_tau = tau;
            found = true;
        }
    }
    std::size_t fp = 0;
    for (double s : ood_scores)
        if (s >= best_tau) ++fp;
    return static_cast<double>(fp) / static_cast<double>(ood_scores.size());
}

// Margin-free perceptron; returns true when it separates the data perfectly
// within the iteration budget, certifying linear separability.
inline bool perceptron_separable(const std::vector<Vector>& xs, const std::vector<int>& ys,
                                 std::size_t max_epochs = 2000) {
    const std::size_t d = xs[0].size();
    Vector w(d, 0.0);
    double b = 0.0;
    for (std::size_t ep = 0; ep < max_epochs; ++ep) {
        std::size_t mistakes = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double s = b;
            for (std::size_t c = 0; c < d; ++c) s += w[c] * xs[i][c];
            if ((s > 0 ? 1 : -1) != ys[i] || s == 0) {
                for (std::size_t c = 0; c < d; ++c) w[c] += ys[i] * xs[i][c];
                b += ys[i];
                ++mistakes;
            }
        }
        if (mistakes == 0) return true;
    }
    return false;
}

// Enumerates mutable pointers to every trainable parameter of the model.
inline std::vector<double*> parameter_view(nanlab::MlpModel& m) {
    std::vector<double*> out;
    for (auto& w : m.weights)
        for (double& v : w.data()) out.push_back(&v);
    if (m.use_bias)
        for (auto& b : m.biases)
            for (double& v : b) out.push_back(&v);
    if (m.has_projection)
        for (double& v : m.projection.data()) out.push_back(&v);
    for (auto& p : m.prototypes)
        for (double& v : p) out.push_back(&v);
    return out;
}

// Gathers the analytic gradient in the same order as parameter_view.
inline std::vector<double> gradient_view(const nanlab::MlpModel& m, const nanlab::Gradients& g) {
    std::vector<double> out;
    for (const auto& w : g.weights)
        for (double v : w.data()) out.push_back(v);
    if (m.use_bias)
        for (const auto& b : g.biases)
            for (double v : b) out.push_back(v);
    if (m.has_projection)
        for (double v : g.projection.data()) out.push_back(v);
    for (const auto& p : g.prototypes)
        for (double v : p) out.push_back(v);
    return out;
}

// Max relative error between analytic and central finite-difference gradients.
inline double max_grad_rel_error(nanlab::MlpModel model, const std::vector<Vector>& xs,
                                 const std::vector<std::size_t>& ys, double step = 1e-5) {
    nanlab::Gradients g = nanlab::backward(model, xs, ys);
    std::vector<double> analytic = gradient_view(model, g);
    std::vector<double*> params = parameter_view(model);
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = *params[i];
        *params[i] = orig + step;
        const double lp = nanlab::backward(model, xs, ys).loss;
        *params[i] = orig - step;
        const double lm = nanlab::backward(model, xs, ys).loss;
        *params[i] = orig;
        const double fd = (lp - lm) / (2.0 * step);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-6});
        worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace testutil
