#pragma once

#include <string>
#include <vector>

#include "nanlab/data.hpp"
#include "nanlab/net.hpp"

namespace nanlab {

// Input-dependent linear classifier relating layer-l activations (or
// pre-activations) to the final logits: psi = C v + gamma, with the binarized
// variant psi_bar = sign(C) v. Valid only for the trace it was computed from;
// basis_vec keeps that trace's layer vector so misuse is detectable.
struct HiddenClassifier {
    std::size_t layer = 0;
    bool pre_activation = false;
    Matrix C;      // K x d_l
    Matrix B;      // sign(C), entries in {-1, +1}
    Vector gamma;  // empty for bias-free models
    Vector basis_vec;
};

// Coefficient matrix over a^(l); l = 0 uses the input itself, l = L gives the
// effective final weight (empty backward product). For bias models gamma makes
// psi = C a + gamma exact.
HiddenClassifier coefficient_matrix(const MlpModel& model, const ForwardTrace& trace,
                                    std::size_t l);

// Same relation over z^(l), 1 <= l <= L.
HiddenClassifier pre_activation_classifier(const MlpModel& model, const ForwardTrace& trace,
                                           std::size_t l);

// B v for the classifier's own layer vector; trace must be the originating one.
Vector hidden_logits(const HiddenClassifier& hc, const ForwardTrace& trace);

// (|a|_1 - psi_bar_k, |a|_inf * |sign(a) - b_k|_1); always 0 <= error <= bound.
std::pair<double, double> approx_error(const ForwardTrace& trace, const HiddenClassifier& hc,
                                       std::size_t k);

struct HiddenDiagnostics {
    double hidden_accuracy = 0.0;
    double mean_prediction_entropy = 0.0;
    double mean_sign_difference_target = 0.0;
    double mean_normalized_error_target = 0.0;
    double mean_normalized_error_nontarget = 0.0;
};

HiddenDiagnostics hidden_diagnostics(const MlpModel& model, const Dataset& dataset,
                                     std::size_t l);

struct DiagnosticsRow {
    std::size_t checkpoint_epoch = 0;
    std::size_t layer = 0;
    HiddenDiagnostics stats;
};

void save_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, const std::string& path);

}  // namespace nanlab
