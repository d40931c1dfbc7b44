#pragma once

#include <string>
#include <vector>

#include "nanlab/data.hpp"
#include "nanlab/net.hpp"
#include "nanlab/scores.hpp"
#include "nanlab/train.hpp"

namespace nanlab {

struct DataConfig {
    std::string generator = "blobs";  // blobs | blobs_unlabeled | csv
    BlobsParams blobs;
    bool normalize = true;  // project inputs onto the sqrt(d) sphere
    std::string csv_train;
    std::string csv_test;
};

struct ModelConfig {
    std::vector<std::size_t> hidden_dims = {128, 128};
    ActivationKind activation = ActivationKind::relu();
    bool use_bias = true;
    double temperature = 0.1;
    std::size_t projection_dim = 0;  // 0 keeps U = identity
};

struct EvalConfig {
    double react_percentile = 90.0;
    std::size_t ssd_clusters = 8;
    std::size_t residual_dim = 0;
    std::size_t knn_k = 10;
    double gaussian_shrinkage = 0.05;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DataConfig data;
    std::vector<OodParams> ood_sets;
    ModelConfig model;
    TrainConfig train;
    std::vector<ScoreKind> score_kinds;
    EvalConfig eval;
    std::string output_dir = "runs/out";

    void validate() const;  // throws ConfigError naming the offending key
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical re-serialization of the parsed config; digest and replay both
// work from this form, so formatting of the input file never matters.
std::string canonical_config(const ExperimentConfig& config);

// FNV-1a 64-bit hex digest of the canonical form.
std::string config_digest(const ExperimentConfig& config);

}  // namespace nanlab
