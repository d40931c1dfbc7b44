#pragma once

#include <string>
#include <vector>

#include "nanlab/config.hpp"
#include "nanlab/eval.hpp"
#include "nanlab/hidden.hpp"

namespace nanlab {

struct VerifyFailure {
    std::size_t depth = 0;
    std::string activation;
    bool bias = false;
    std::size_t layer = 0;
    std::string check;
    double value = 0.0;
};

struct VerifyReport {
    bool ok = true;
    double max_decomposition_residual = 0.0;
    double max_bound_violation = 0.0;
    std::vector<VerifyFailure> failures;
};

// Random-net sweep over depths {2,3,5} x activations x bias, checking the
// logit decomposition (post- and pre-activation forms) and the binarized
// approximation bound on every layer. The decomposition is cross-checked
// against an in-place reconstruction from raw weight products, which doubles
// as the fault-injection site: inject_gelu_fault swaps the GeLU ratio for the
// GeLU derivative there, which must break the identity.
VerifyReport verify_suite(std::uint64_t seed, std::size_t inputs_per_net = 100,
                          bool inject_gelu_fault = false);

struct TrendPoint {
    std::size_t epoch = 0;
    double mean_entropy = 0.0;
    double l1_auroc = 0.0;  // against the first OOD set
};

struct ExperimentArtifacts {
    ExperimentConfig config;
    MlpModel model;
    std::vector<EpochStats> history;
    std::vector<Checkpoint> checkpoints;
    std::vector<DiagnosticsRow> diagnostics;
    std::vector<TrendPoint> trend;
    Dataset id_train;  // scheme-labeled training fold (normalized)
    Dataset id_train_true;  // ground-truth labels where available
    Dataset id_test;
    std::vector<Dataset> ood_sets;
    BankIndex bank;
    EvalReport report;
};

// Full pipeline: generate, train with checkpoints, diagnose, score, evaluate.
// Deterministic given config.seed. When out_dir is non-empty all artifacts
// (model.json, history.csv, diagnostics.csv, trend.csv, scores.csv,
// report.json, config.json, digest.txt, plots/*.svg) are written there.
ExperimentArtifacts run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                   std::size_t threads = 1);

}  // namespace nanlab
