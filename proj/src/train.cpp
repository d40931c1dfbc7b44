#include "nanlab/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace nanlab {

LabelScheme scheme_from_string(const std::string& s) {
    if (s == "S") return LabelScheme::S;
    if (s == "I") return LabelScheme::I;
    if (s == "Is") return LabelScheme::Is;
    if (s == "R") return LabelScheme::R;
    if (s == "O") return LabelScheme::O;
    throw InvalidParameter("unknown label scheme '" + s + "'");
}

std::string scheme_name(LabelScheme s) {
    switch (s) {
        case LabelScheme::S:
            return "S";
        case LabelScheme::I:
            return "I";
        case LabelScheme::Is:
            return "Is";
        case LabelScheme::R:
            return "R";
        case LabelScheme::O:
            return "O";
    }
    return "S";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidParameter("train: epochs must be >= 1");
    if (batch_size < 1) throw InvalidParameter("train: batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw InvalidParameter("train: lr0 must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw InvalidParameter("train: momentum outside [0,1)");
    if (weight_decay < 0.0) throw InvalidParameter("train: weight_decay must be >= 0");
    if (augment_noise_sigma < 0.0) throw InvalidParameter("train: augment sigma must be >= 0");
    if (augment_drop_prob < 0.0 || augment_drop_prob > 1.0)
        throw InvalidParameter("train: drop prob outside [0,1]");
}

Dataset assign_labels(const Dataset& dataset, LabelScheme scheme, Rng& rng,
                      std::size_t instance_cap) {
    if (dataset.features.empty()) throw InvalidParameter("assign_labels: empty dataset");
    Dataset out;
    out.name = dataset.name + "_" + scheme_name(scheme);
    out.role = dataset.role;
    out.features = dataset.features;
    switch (scheme) {
        case LabelScheme::S:
            if (!dataset.labeled())
                throw InvalidParameter("assign_labels: scheme S requires a labeled dataset");
            out.labels = dataset.labels;
            break;
        case LabelScheme::I:
        case LabelScheme::Is: {
            if (out.features.size() > instance_cap) out.features.resize(instance_cap);
            out.labels.resize(out.features.size());
            for (std::size_t i = 0; i < out.labels.size(); ++i) out.labels[i] = i;
            break;
        }
        case LabelScheme::R:
            out.labels.resize(out.features.size());
            for (std::size_t i = 0; i < out.labels.size(); ++i) out.labels[i] = rng.next_u64() & 1;
            break;
        case LabelScheme::O:
            out.labels.assign(out.features.size(), 0);
            break;
    }
    return out;
}

Vector augment(const Vector& x, double sigma, Rng& rng, double drop_prob) {
    if (sigma < 0.0) throw InvalidParameter("augment: sigma must be >= 0");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + sigma * rng.normal();
    if (drop_prob > 0.0)
        for (double& v : out)
            if (rng.uniform() < drop_prob) v = 0.0;
    return out;
}

double cosine_lr(std::size_t t, std::size_t total, double lr0) {
    if (total == 0) throw InvalidParameter("cosine_lr: total must be >= 1");
    if (t > total) throw InvalidParameter("cosine_lr: t exceeds total");
    return lr0 * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(total)));
}

namespace {

struct Velocity {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix projection;
    std::vector<Vector> prototypes;
};

void sgd_step(MlpModel& m, Velocity& v, const Gradients& g, double lr, double mom, double wd) {
    auto update = [&](double& p, double& vel, double grad, bool decay) {
        vel = mom * vel + grad;
        p -= lr * vel;
        if (decay) p -= lr * wd * p;
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        auto& wd_ = m.weights[l].data();
        auto& vd = v.weights[l].data();
        const auto& gd = g.weights[l].data();
        for (std::size_t i = 0; i < wd_.size(); ++i) update(wd_[i], vd[i], gd[i], true);
        if (m.use_bias)
            for (std::size_t i = 0; i < m.biases[l].size(); ++i)
                update(m.biases[l][i], v.biases[l][i], g.biases[l][i], false);
    }
    if (m.has_projection)
        for (std::size_t i = 0; i < m.projection.data().size(); ++i)
            update(m.projection.data()[i], v.projection.data()[i], g.projection.data()[i], true);
    for (std::size_t k = 0; k < m.prototypes.size(); ++k)
        for (std::size_t i = 0; i < m.prototypes[k].size(); ++i)
            update(m.prototypes[k][i], v.prototypes[k][i], g.prototypes[k][i], true);
}

}  // namespace

TrainResult train(const MlpModel& init, const Dataset& labeled, const TrainConfig& config) {
    config.validate();
    if (!labeled.labeled()) throw InvalidParameter("train: dataset has no labels");
    if (labeled.num_classes() > init.num_classes())
        throw InvalidParameter("train: more labels than prototypes");

    TrainResult res;
    res.model = init;
    res.checkpoints.push_back({0, init});

    Velocity vel;
    for (const auto& w : init.weights) vel.weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : init.biases) vel.biases.emplace_back(b.size(), 0.0);
    if (init.has_projection)
        vel.projection = Matrix(init.projection.rows(), init.projection.cols());
    for (const auto& p : init.prototypes) vel.prototypes.emplace_back(p.size(), 0.0);

    Rng rng = Rng(config.seed).split(0x7261696eULL);  // training stream
    const std::size_t n = labeled.size();
    const bool use_aug = config.scheme == LabelScheme::Is && config.augment_noise_sigma > 0.0;

    for (std::size_t ep = 0; ep < config.epochs; ++ep) {
        const double lr = cosine_lr(ep, config.epochs, config.lr0);
        std::vector<std::size_t> perm = rng.permutation(n);
        double total_loss = 0.0;
        std::size_t total_correct = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(start + config.batch_size, n);
            std::vector<Vector> xs;
            std::vector<std::size_t> ys;
            xs.reserve(stop - start);
            ys.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const Vector& x = labeled.features[perm[i]];
                xs.push_back(use_aug ? augment(x, config.augment_noise_sigma, rng,
                                               config.augment_drop_prob)
                                     : x);
                ys.push_back(labeled.labels[perm[i]]);
            }
            Gradients g;
            try {
                g = backward(res.model, xs, ys);
            } catch (const NumericalFailure& e) {
                throw NumericalFailure(std::string(e.what()) + " at epoch " + std::to_string(ep));
            }
            total_loss += g.loss * static_cast<double>(xs.size());
            total_correct += g.correct;
            sgd_step(res.model, vel, g, lr, config.momentum, config.weight_decay);
        }
        res.history.push_back({ep + 1, total_loss / static_cast<double>(n),
                               static_cast<double>(total_correct) / static_cast<double>(n), lr});
        if (!std::isfinite(res.history.back().loss))
            throw NumericalFailure("train: non-finite epoch loss at epoch " + std::to_string(ep));
        if (config.checkpoint_stride > 0 && (ep + 1) % config.checkpoint_stride == 0 &&
            ep + 1 < config.epochs)
            res.checkpoints.push_back({ep + 1, res.model});
    }
    res.checkpoints.push_back({config.epochs, res.model});
    return res;
}

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("save_history_csv: cannot open " + path);
    f << "epoch,loss,train_acc,lr\n";
    char buf[128];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", h.epoch, h.loss, h.accuracy,
                      h.lr);
        f << buf;
    }
}

}  // namespace nanlab
