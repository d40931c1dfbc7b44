#include "nanlab/scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "nanlab/hidden.hpp"

namespace nanlab {

std::string ScoreKind::label() const {
    std::string base;
    switch (name) {
        case ScoreName::MSP: base = "msp"; break;
        case ScoreName::MaxLogit: base = "maxlogit"; break;
        case ScoreName::Energy: base = "energy"; break;
        case ScoreName::KLUniform: base = "kl_uniform"; break;
        case ScoreName::Mahalanobis: base = "mahalanobis"; break;
        case ScoreName::KNN: base = "knn"; break;
        case ScoreName::SSD: base = "ssd"; break;
        case ScoreName::Residual: base = "residual"; break;
        case ScoreName::L1Norm: base = "l1"; break;
        case ScoreName::LpNorm: base = "lp" + std::to_string(p); break;
        case ScoreName::InvL0: base = "inv_l0"; break;
        case ScoreName::NAN_: base = "nan"; break;
        case ScoreName::EmbeddingMagnitude: base = "embedding_magnitude"; break;
        case ScoreName::HiddenConfidence: base = "hidden_confidence"; break;
        case ScoreName::FusedKNN: base = "fused_knn"; break;
        case ScoreName::FusedSSD: base = "fused_ssd"; break;
    }
    return react ? base + "_react" : base;
}

ScoreKind score_kind_from_string(const std::string& s) {
    ScoreKind k;
    std::string base = s;
    if (base.size() > 6 && base.substr(base.size() - 6) == "_react") {
        k.react = true;
        base = base.substr(0, base.size() - 6);
    }
    if (base == "msp") k.name = ScoreName::MSP;
    else if (base == "maxlogit") k.name = ScoreName::MaxLogit;
    else if (base == "energy") k.name = ScoreName::Energy;
    else if (base == "kl_uniform") k.name = ScoreName::KLUniform;
    else if (base == "mahalanobis") k.name = ScoreName::Mahalanobis;
    else if (base == "knn") k.name = ScoreName::KNN;
    else if (base == "ssd") k.name = ScoreName::SSD;
    else if (base == "residual") k.name = ScoreName::Residual;
    else if (base == "l1") k.name = ScoreName::L1Norm;
    else if (base == "l2") { k.name = ScoreName::LpNorm; k.p = 2.0; }
    else if (base == "inv_l0") k.name = ScoreName::InvL0;
    else if (base == "nan") k.name = ScoreName::NAN_;
    else if (base == "embedding_magnitude") k.name = ScoreName::EmbeddingMagnitude;
    else if (base == "hidden_confidence") k.name = ScoreName::HiddenConfidence;
    else if (base == "fused_knn") k.name = ScoreName::FusedKNN;
    else if (base == "fused_ssd") k.name = ScoreName::FusedSSD;
    else throw InvalidParameter("unknown score kind '" + s + "'");
    return k;
}

double nan_score(const Vector& a) {
    const std::size_t act = active_count(a);
    if (act == 0) return 0.0;
    return lp_norm(a, 1.0) / static_cast<double>(act);
}

ClassifierScores classifier_scores(const ForwardTrace& trace) {
    ClassifierScores s;
    Vector p = softmax(trace.logits);
    s.msp = *std::max_element(p.begin(), p.end());
    s.maxlogit = *std::max_element(trace.logits.begin(), trace.logits.end());
    s.energy = logsumexp(trace.logits);
    double h = 0.0;
    for (double pi : p)
        if (pi > 0.0) h -= pi * std::log(pi);
    s.kl_uniform = std::log(static_cast<double>(p.size())) - h;
    return s;
}

double mahalanobis_score(const Vector& f, const GaussianModel& g) {
    if (!g.fitted) throw InvalidState("mahalanobis_score: model not fitted");
    return -g.min_sq_dist(f);
}

double knn_score(const Vector& f, const BankIndex& bank, std::size_t k) {
    if (k < 1 || k > bank.normalized_features.size())
        throw InvalidParameter("knn_score: k outside [1, bank size]");
    Vector q = normalized_l2(f);
    Vector d2(bank.normalized_features.size());
    for (std::size_t i = 0; i < d2.size(); ++i) d2[i] = sq_dist(q, bank.normalized_features[i]);
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k - 1), d2.end());
    return -std::sqrt(d2[k - 1]);
}

double ssd_score(const Vector& f, const BankIndex& bank) {
    if (bank.cluster_gaussians.empty()) throw InvalidState("ssd_score: clusters not fitted");
    double best = kInfinityP;
    Vector diff(f.size());
    for (const auto& [mu, prec] : bank.cluster_gaussians) {
        for (std::size_t i = 0; i < f.size(); ++i) diff[i] = f[i] - mu[i];
        best = std::min(best, dot(diff, prec.matvec(diff)));
    }
    return -best;
}

double residual_score(const Vector& f, const BankIndex& bank) {
    if (!bank.pca) throw InvalidState("residual_score: subspace not fitted");
    return -bank.pca->residual_norm(f);
}

Vector react_rectify(const Vector& a, double threshold) {
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::min(a[i], threshold);
    return out;
}

double fuse_distance_nan(double distance_score, double nan) {
    if (nan < 0.0) throw InvalidParameter("fuse_distance_nan: nan must be >= 0");
    return distance_score / std::max(nan, 1e-12);
}

BankIndex build_bank(const MlpModel& model, const Dataset& id_bank, const BankConfig& config) {
    if (id_bank.features.empty()) throw InvalidParameter("build_bank: empty bank dataset");
    BankIndex bank;
    for (const auto& x : id_bank.features)
        bank.features.push_back(forward(model, x).a.back());
    for (const auto& f : bank.features) bank.normalized_features.push_back(normalized_l2(f));

    // Class-conditional Gaussian; unlabeled banks fall back to one class.
    std::vector<std::vector<Vector>> by_class;
    if (id_bank.labeled()) {
        by_class.resize(id_bank.num_classes());
        for (std::size_t i = 0; i < bank.features.size(); ++i)
            by_class[id_bank.labels[i]].push_back(bank.features[i]);
    } else {
        by_class.push_back(bank.features);
    }
    bank.gaussian = fit_gaussian(by_class, config.gaussian_shrinkage);

    // Per-cluster Gaussians for SSD.
    Rng krng = Rng(config.seed).split(0x6b6d65616eULL);
    std::size_t nclusters = std::min(config.ssd_clusters, bank.features.size());
    KmeansResult km = kmeans(bank.features, nclusters, krng);
    const std::size_t d = bank.features[0].size();
    for (std::size_t j = 0; j < nclusters; ++j) {
        std::vector<Vector> members;
        for (std::size_t i = 0; i < bank.features.size(); ++i)
            if (km.assignments[i] == j) members.push_back(bank.features[i]);
        if (members.empty()) continue;
        Vector mu(d, 0.0);
        for (const auto& f : members)
            for (std::size_t c = 0; c < d; ++c) mu[c] += f[c];
        for (double& v : mu) v /= static_cast<double>(members.size());
        Matrix cov(d, d);
        for (const auto& f : members)
            for (std::size_t i = 0; i < d; ++i) {
                double di = f[i] - mu[i];
                for (std::size_t c = 0; c < d; ++c) cov(i, c) += di * (f[c] - mu[c]);
            }
        for (auto& v : cov.data()) v /= static_cast<double>(members.size());
        double tr = 0.0;
        for (std::size_t i = 0; i < d; ++i) tr += cov(i, i);
        const double ridge =
            std::max(config.gaussian_shrinkage * tr / static_cast<double>(d), 1e-12);
        for (auto& v : cov.data()) v *= (1.0 - config.gaussian_shrinkage);
        for (std::size_t i = 0; i < d; ++i) cov(i, i) += ridge;
        bank.cluster_gaussians.emplace_back(std::move(mu), spd_inverse(cov));
    }

    std::size_t rdim = config.residual_dim > 0 ? config.residual_dim : std::max<std::size_t>(d / 4, 1);
    rdim = std::min(rdim, d);
    if (bank.features.size() > rdim) bank.pca = pca_subspace(bank.features, rdim);

    Vector pooled;
    pooled.reserve(bank.features.size() * d);
    for (const auto& f : bank.features) pooled.insert(pooled.end(), f.begin(), f.end());
    bank.react_threshold = percentile(pooled, config.react_percentile);
    return bank;
}

bool kind_needs_bank(const ScoreKind& kind) {
    if (kind.react) return true;
    switch (kind.name) {
        case ScoreName::Mahalanobis:
        case ScoreName::KNN:
        case ScoreName::SSD:
        case ScoreName::Residual:
        case ScoreName::FusedKNN:
        case ScoreName::FusedSSD:
            return true;
        default:
            return false;
    }
}

namespace {

// View of one sample after optional ReAct clipping; logits and embedding are
// recomputed from the clipped activations so every downstream score sees the
// same rectified trace.
struct ScoreView {
    Vector a;
    Vector g;
    Vector logits;
};

ScoreView make_view(const MlpModel& model, const ForwardTrace& trace, bool react,
                    const BankIndex* bank) {
    ScoreView v;
    if (!react) {
        v.a = trace.a.back();
        v.g = trace.g;
        v.logits = trace.logits;
        return v;
    }
    if (!bank || !bank->react_threshold)
        throw InvalidParameter("score_dataset: ReAct needs a bank with a threshold");
    v.a = react_rectify(trace.a.back(), *bank->react_threshold);
    v.g = model.has_projection ? model.projection.tmatvec(v.a) : v.a;
    const double gn = lp_norm(v.g, 2.0);
    v.logits.assign(model.num_classes(), 0.0);
    if (gn > 0.0)
        for (std::size_t k = 0; k < model.num_classes(); ++k)
            v.logits[k] = dot(model.prototypes[k], v.g) /
                          (model.temperature * lp_norm(model.prototypes[k], 2.0) * gn);
    return v;
}

double score_one(const MlpModel& model, const Vector& x, const ScoreKind& kind,
                 const BankIndex* bank) {
    ForwardTrace trace = forward(model, x);
    ScoreView v = make_view(model, trace, kind.react, bank);
    switch (kind.name) {
        case ScoreName::MSP:
        case ScoreName::MaxLogit:
        case ScoreName::Energy:
        case ScoreName::KLUniform: {
            ForwardTrace t2;
            t2.logits = v.logits;
            ClassifierScores cs = classifier_scores(t2);
            if (kind.name == ScoreName::MSP) return cs.msp;
            if (kind.name == ScoreName::MaxLogit) return cs.maxlogit;
            if (kind.name == ScoreName::Energy) return cs.energy;
            return cs.kl_uniform;
        }
        case ScoreName::Mahalanobis:
            return mahalanobis_score(v.a, *bank->gaussian);
        case ScoreName::KNN:
            return knn_score(v.a, *bank, kind.k);
        case ScoreName::SSD:
            return ssd_score(v.a, *bank);
        case ScoreName::Residual:
            return residual_score(v.a, *bank);
        case ScoreName::L1Norm:
            return lp_norm(v.a, 1.0);
        case ScoreName::LpNorm:
            return lp_norm(v.a, kind.p);
        case ScoreName::InvL0: {
            const std::size_t act = active_count(v.a);
            return act == 0 ? 0.0 : 1.0 / static_cast<double>(act);
        }
        case ScoreName::NAN_:
            return nan_score(v.a);
        case ScoreName::EmbeddingMagnitude:
            return lp_norm(v.g, 2.0);
        case ScoreName::HiddenConfidence: {
            HiddenClassifier hc = coefficient_matrix(model, trace, model.num_layers());
            Vector psi_bar = hidden_logits(hc, trace);
            return *std::max_element(psi_bar.begin(), psi_bar.end());
        }
        case ScoreName::FusedKNN:
            return fuse_distance_nan(knn_score(v.a, *bank, kind.k), nan_score(v.a));
        case ScoreName::FusedSSD:
            return fuse_distance_nan(ssd_score(v.a, *bank), nan_score(v.a));
    }
    return 0.0;
}

}  // namespace

Vector score_dataset(const MlpModel& model, const Dataset& dataset, const ScoreKind& kind,
                     const BankIndex* bank, std::size_t threads) {
    if (kind_needs_bank(kind) && bank == nullptr)
        throw InvalidParameter("score_dataset: kind '" + kind.label() + "' requires a bank");
    const std::size_t n = dataset.size();
    Vector out(n, 0.0);
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = score_one(model, dataset.features[i], kind, bank);
        return out;
    }
    // Order-preserving fan-out: each worker fills its own slots.
    const std::size_t nt = std::min(threads, n);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t]() {
            for (std::size_t i = t; i < n; i += nt)
                out[i] = score_one(model, dataset.features[i], kind, bank);
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

void save_scores_csv(const std::vector<std::string>& names,
                     const std::vector<Vector>& columns, const std::vector<bool>& is_ood,
                     const std::string& path) {
    if (names.size() != columns.size())
        throw InvalidParameter("save_scores_csv: names/columns mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("save_scores_csv: cannot open " + path);
    f << "sample_id,is_ood";
    for (const auto& nm : names) f << ',' << nm;
    f << "\n";
    char buf[40];
    for (std::size_t i = 0; i < is_ood.size(); ++i) {
        f << i << ',' << (is_ood[i] ? 1 : 0);
        for (const auto& col : columns) {
            std::snprintf(buf, sizeof(buf), "%.17g", col[i]);
            f << ',' << buf;
        }
        f << "\n";
    }
}

}  // namespace nanlab
