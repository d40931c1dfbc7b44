#pragma once

#include <string>
#include <vector>

#include "nanlab/data.hpp"
#include "nanlab/net.hpp"

namespace nanlab {

// S: ground-truth labels. I/Is: one label per instance (Is adds feature-space
// augmentation during training). R: fixed random binary labels. O: everything
// in a single class, which makes the cross-entropy vacuous at K = 1.
enum class LabelScheme { S, I, Is, R, O };

LabelScheme scheme_from_string(const std::string& s);
std::string scheme_name(LabelScheme s);

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    double lr0 = 0.06;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LabelScheme scheme = LabelScheme::S;
    double augment_noise_sigma = 0.0;
    double augment_drop_prob = 0.1;
    std::uint64_t seed = 0;
    std::size_t checkpoint_stride = 0;  // 0 disables intermediate checkpoints
    std::size_t instance_cap = 2048;    // cap on N for instance schemes

    void validate() const;
};

// Relabels (and for instance schemes truncates) a copy of the dataset per the
// scheme. The number of classes implied by the result sizes the prototype set.
Dataset assign_labels(const Dataset& dataset, LabelScheme scheme, Rng& rng,
                      std::size_t instance_cap = 2048);

// Gaussian noise of scale sigma plus independent zeroing of each coordinate
// with probability drop_prob.
Vector augment(const Vector& x, double sigma, Rng& rng, double drop_prob = 0.1);

double cosine_lr(std::size_t t, std::size_t total, double lr0);

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double lr = 0.0;
};

struct Checkpoint {
    std::size_t epoch = 0;
    MlpModel model;
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochStats> history;
    std::vector<Checkpoint> checkpoints;  // always includes the init at epoch 0
};

// SGD with momentum, decoupled weight decay and the cosine schedule, over the
// mean cross-entropy of the cosine logits. Deterministic given config.seed.
TrainResult train(const MlpModel& init, const Dataset& labeled, const TrainConfig& config);

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace nanlab
