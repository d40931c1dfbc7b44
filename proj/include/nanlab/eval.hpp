#pragma once

#include <map>
#include <string>
#include <vector>

#include "nanlab/data.hpp"
#include "nanlab/net.hpp"
#include "nanlab/scores.hpp"

namespace nanlab {

// Probability that a random ID score exceeds a random OOD score, ties 0.5;
// rank-sum implementation, exactly equal to pair counting.
double auroc(const Vector& id_scores, const Vector& ood_scores);

// FPR on OOD at the largest threshold tau with |{id >= tau}| / n >= 0.95.
double fpr95(const Vector& id_scores, const Vector& ood_scores);

struct ActivationEntropy {
    Vector per_unit;  // Bernoulli entropy of a_i > 0 per unit, natural log
    double mean = 0.0;
};
ActivationEntropy activation_entropy(const std::vector<Vector>& activations);

// Mean of 1/active_count per sample; all-inactive samples contribute the cap.
double mean_sparsity(const std::vector<Vector>& activations, double inactive_cap = 1.0);

// Rank correlation with average ranks for ties.
double spearman(const Vector& x, const Vector& y);

struct ScoreCell {
    std::string score_name;
    std::string ood_set;
    double auroc = 0.0;
    double fpr95 = 0.0;
    double train_auroc = 0.0;  // scored against the ID train fold
};

struct EvalReport {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<ScoreCell> scores;
    double id_accuracy = 0.0;
    double mean_activation_entropy = 0.0;
    double mean_sparsity_value = 0.0;
};

EvalReport build_report(const MlpModel& model, const Dataset& id_train, const Dataset& id_test,
                        const std::vector<Dataset>& ood_sets,
                        const std::vector<ScoreKind>& score_kinds, const BankIndex& bank,
                        std::size_t threads = 1);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);

}  // namespace nanlab
