#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nanlab/data.hpp"
#include "nanlab/net.hpp"
#include "nanlab/numcore.hpp"

namespace nanlab {

// Convention everywhere: larger score means "more in-distribution".

struct BankConfig {
    double gaussian_shrinkage = 0.05;
    std::size_t ssd_clusters = 8;
    std::size_t residual_dim = 0;  // 0: feature dim / 4
    double react_percentile = 90.0;
    std::uint64_t seed = 0;
};

// Read-only index over the ID feature bank (last hidden layer by default).
struct BankIndex {
    std::vector<Vector> features;
    std::vector<Vector> normalized_features;
    std::optional<GaussianModel> gaussian;                  // class-conditional, shared cov
    std::vector<std::pair<Vector, Matrix>> cluster_gaussians;  // (mean, precision) per cluster
    std::optional<PcaSubspace> pca;
    std::optional<double> react_threshold;
};

// Extracts the last-hidden-layer bank from the model and fits every
// auxiliary structure the configured score kinds may need.
BankIndex build_bank(const MlpModel& model, const Dataset& id_bank, const BankConfig& config);

enum class ScoreName {
    MSP,
    MaxLogit,
    Energy,
    KLUniform,
    Mahalanobis,
    KNN,
    SSD,
    Residual,
    L1Norm,
    LpNorm,
    InvL0,
    NAN_,
    EmbeddingMagnitude,
    HiddenConfidence,
    FusedKNN,
    FusedSSD,
};

struct ScoreKind {
    ScoreName name = ScoreName::NAN_;
    double p = 2.0;          // LpNorm
    std::size_t k = 10;      // KNN
    bool react = false;      // clip activations at the bank threshold first

    std::string label() const;
};

ScoreKind score_kind_from_string(const std::string& s);

double nan_score(const Vector& a);

struct ClassifierScores {
    double msp = 0.0;
    double maxlogit = 0.0;
    double energy = 0.0;
    double kl_uniform = 0.0;
};
ClassifierScores classifier_scores(const ForwardTrace& trace);

double mahalanobis_score(const Vector& f, const GaussianModel& g);
double knn_score(const Vector& f, const BankIndex& bank, std::size_t k);
double ssd_score(const Vector& f, const BankIndex& bank);
double residual_score(const Vector& f, const BankIndex& bank);

Vector react_rectify(const Vector& a, double threshold);

// distance_score is <= 0 by convention; the ratio keeps higher == more ID.
double fuse_distance_nan(double distance_score, double nan);

bool kind_needs_bank(const ScoreKind& kind);

Vector score_dataset(const MlpModel& model, const Dataset& dataset, const ScoreKind& kind,
                     const BankIndex* bank = nullptr, std::size_t threads = 1);

void save_scores_csv(const std::vector<std::string>& names,
                     const std::vector<Vector>& columns, const std::vector<bool>& is_ood,
                     const std::string& path);

}  // namespace nanlab
