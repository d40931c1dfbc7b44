#include "nanlab/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nanlab/svg.hpp"

namespace nanlab {

namespace {

const char* act_name(const ActivationKind& a) {
    switch (a.kind) {
        case Activation::ReLU:
            return "relu";
        case Activation::LeakyReLU:
            return "leaky_relu";
        case Activation::GeLU:
            return "gelu";
    }
    return "relu";
}

// Rebuilds psi = C^(l) a^(l) + gamma from raw weight products, independently
// of hidden.cpp's implementation. `fault` replaces the GeLU ratio Phi(z) with
// the GeLU derivative, which must break the identity.
Vector reconstruct_logits(const MlpModel& model, const ForwardTrace& trace, std::size_t l,
                          bool fault) {
    const std::size_t L = model.num_layers();
    Matrix m = coefficient_matrix(model, trace, L).C;  // effective final weight
    Vector gamma(model.num_classes(), 0.0);
    for (std::size_t j = L; j > l; --j) {
        Vector ratio(trace.z[j - 1].size());
        for (std::size_t i = 0; i < ratio.size(); ++i) {
            const double z = trace.z[j - 1][i];
            if (fault && model.activation.kind == Activation::GeLU)
                ratio[i] = activate_derivative(z, model.activation);
            else
                ratio[i] = z == 0.0 ? 0.0
                                    : activate(z, model.activation) / z;
        }
        for (std::size_t c = 0; c < ratio.size(); ++c) m.scale_col(c, ratio[c]);
        if (model.use_bias) {
            Vector contrib = m.matvec(model.biases[j - 1]);
            for (std::size_t k = 0; k < gamma.size(); ++k) gamma[k] += contrib[k];
        }
        m = m.matmul(model.weights[j - 1].transposed());
    }
    const Vector& basis = l == 0 ? trace.x : trace.a[l - 1];
    Vector psi = m.matvec(basis);
    for (std::size_t k = 0; k < psi.size(); ++k) psi[k] += model.use_bias ? gamma[k] : 0.0;
    return psi;
}

}  // namespace

VerifyReport verify_suite(std::uint64_t seed, std::size_t inputs_per_net,
                          bool inject_gelu_fault) {
    VerifyReport rep;
    Rng rng = Rng(seed).split(0x76657269ULL);
    const std::size_t depths[] = {2, 3, 5};
    const ActivationKind acts[] = {ActivationKind::relu(), ActivationKind::leaky(0.05),
                                   ActivationKind::gelu()};
    const std::size_t K = 4;

    auto record = [&](std::size_t depth, const ActivationKind& a, bool bias, std::size_t layer,
                      const std::string& check, double value) {
        rep.ok = false;
        if (rep.failures.size() < 32)
            rep.failures.push_back({depth, act_name(a), bias, layer, check, value});
    };

    for (std::size_t depth : depths) {
        std::vector<std::size_t> dims(depth + 1, 10);
        dims[0] = 6;
        for (const auto& act : acts) {
            for (bool bias : {false, true}) {
                MlpModel model = build_mlp(dims, act, bias, K, 0.1, rng);
                if (bias) {
                    // random biases so the Gamma path is actually exercised
                    for (auto& b : model.biases)
                        for (double& v : b) v = rng.uniform(-0.5, 0.5);
                }
                for (std::size_t s = 0; s < inputs_per_net; ++s) {
                    Vector x(dims[0]);
                    for (double& v : x) v = rng.normal();
                    ForwardTrace t = forward(model, x);
                    for (std::size_t l = 0; l <= depth; ++l) {
                        HiddenClassifier hc = coefficient_matrix(model, t, l);
                        const Vector& basis = hc.basis_vec;
                        Vector psi = hc.C.matvec(basis);
                        Vector psi_rec = reconstruct_logits(model, t, l, inject_gelu_fault);
                        for (std::size_t k = 0; k < K; ++k) {
                            double p = psi[k] + (bias ? hc.gamma[k] : 0.0);
                            double denom = 1.0 + std::fabs(t.logits[k]);
                            double res = std::fabs(t.logits[k] - p) / denom;
                            double res_rec = std::fabs(t.logits[k] - psi_rec[k]) / denom;
                            double worst = std::max(res, res_rec);
                            rep.max_decomposition_residual =
                                std::max(rep.max_decomposition_residual, worst);
                            if (worst >= 1e-9) record(depth, act, bias, l, "decomposition", worst);
                        }
                        // binarized approximation bound, post-activation form
                        Vector psi_bar = hidden_logits(hc, t);
                        for (std::size_t k = 0; k < K; ++k) {
                            auto [err, bound] = approx_error(t, hc, k);
                            if (err < -1e-9 || err > bound + 1e-9)
                                record(depth, act, bias, l, "thm3_bound",
                                       std::max(-err, err - bound));
                            rep.max_bound_violation = std::max(
                                rep.max_bound_violation, std::max(-err, err - bound));
                            bool aligned = true;
                            Vector sa = sign_vec(basis);
                            for (std::size_t i = 0; i < sa.size() && aligned; ++i)
                                if (sa[i] != hc.B(k, i)) aligned = false;
                            if (aligned && std::fabs(err) > 1e-12)
                                record(depth, act, bias, l, "thm3_equality", err);
                            (void)psi_bar;
                        }
                        if (l >= 1) {
                            HiddenClassifier pre = pre_activation_classifier(model, t, l);
                            Vector psi_hat = pre.C.matvec(pre.basis_vec);
                            for (std::size_t k = 0; k < K; ++k) {
                                double p = psi_hat[k] + (bias ? pre.gamma[k] : 0.0);
                                double res = std::fabs(t.logits[k] - p) /
                                             (1.0 + std::fabs(t.logits[k]));
                                rep.max_decomposition_residual =
                                    std::max(rep.max_decomposition_residual, res);
                                if (res >= 1e-9)
                                    record(depth, act, bias, l, "pre_activation", res);
                            }
                        }
                    }
                }
            }
        }
    }
    return rep;
}

namespace {

namespace fs = std::filesystem;

std::size_t scheme_classes(const Dataset& labeled, LabelScheme scheme) {
    switch (scheme) {
        case LabelScheme::S:
            return labeled.num_classes();
        case LabelScheme::I:
        case LabelScheme::Is:
            return labeled.size();
        case LabelScheme::R:
            return 2;
        case LabelScheme::O:
            return 1;
    }
    return 1;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("cannot open " + path.string());
    f << text;
}

}  // namespace

ExperimentArtifacts run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                   std::size_t threads) {
    config.validate();
    ExperimentArtifacts art;
    art.config = config;

    Rng top(config.seed);
    Rng data_rng = top.split(1);
    Rng model_rng = top.split(2);
    Rng ood_rng = top.split(3);
    Rng label_rng = top.split(4);

    // --- data ---
    if (config.data.generator == "csv") {
        art.id_train_true = load_csv(config.data.csv_train);
        art.id_train_true.role = DatasetRole::IdTrain;
        if (!config.data.csv_test.empty()) {
            art.id_test = load_csv(config.data.csv_test);
            art.id_test.role = DatasetRole::IdTest;
        } else {
            art.id_test = art.id_train_true;
        }
        if (!config.ood_sets.empty())
            throw ConfigError("ood: generated OOD families need the blobs generator");
    } else {
        Blobs blobs = gen_blobs(config.data.blobs, data_rng);
        for (const auto& op : config.ood_sets)
            art.ood_sets.push_back(gen_ood(op, blobs, config.data.blobs.spread, ood_rng));
        art.id_train_true = std::move(blobs.train);
        art.id_test = std::move(blobs.test);
        if (config.data.generator == "blobs_unlabeled") {
            art.id_train_true.labels.clear();
            art.id_test.labels.clear();
        }
    }
    if (config.data.normalize) {
        normalize_to_sphere(art.id_train_true);
        normalize_to_sphere(art.id_test);
        for (auto& o : art.ood_sets) normalize_to_sphere(o);
    }

    // --- train ---
    art.id_train = assign_labels(art.id_train_true, config.train.scheme, label_rng,
                                 config.train.instance_cap);
    std::vector<std::size_t> dims;
    dims.push_back(art.id_train.dim());
    for (std::size_t d : config.model.hidden_dims) dims.push_back(d);
    MlpModel init = build_mlp(dims, config.model.activation, config.model.use_bias,
                              scheme_classes(art.id_train, config.train.scheme),
                              config.model.temperature, model_rng, config.model.projection_dim);
    TrainResult tr = train(init, art.id_train, config.train);
    art.model = std::move(tr.model);
    art.history = std::move(tr.history);
    art.checkpoints = std::move(tr.checkpoints);

    // --- per-checkpoint diagnostics and trends ---
    const std::size_t L = art.model.num_layers();
    for (const auto& ck : art.checkpoints) {
        art.diagnostics.push_back({ck.epoch, L, hidden_diagnostics(ck.model, art.id_train, L)});
        TrendPoint tp;
        tp.epoch = ck.epoch;
        std::vector<Vector> acts;
        Vector l1_id(art.id_train.size());
        for (std::size_t i = 0; i < art.id_train.size(); ++i) {
            acts.push_back(forward(ck.model, art.id_train.features[i]).a.back());
            l1_id[i] = lp_norm(acts.back(), 1.0);
        }
        tp.mean_entropy = activation_entropy(acts).mean;
        if (!art.ood_sets.empty()) {
            Vector l1_ood(art.ood_sets[0].size());
            for (std::size_t i = 0; i < art.ood_sets[0].size(); ++i)
                l1_ood[i] =
                    lp_norm(forward(ck.model, art.ood_sets[0].features[i]).a.back(), 1.0);
            tp.l1_auroc = auroc(l1_id, l1_ood);
        }
        art.trend.push_back(tp);
    }

    // --- bank and report ---
    BankConfig bc;
    bc.gaussian_shrinkage = config.eval.gaussian_shrinkage;
    bc.ssd_clusters = config.eval.ssd_clusters;
    bc.residual_dim = config.eval.residual_dim;
    bc.react_percentile = config.eval.react_percentile;
    bc.seed = config.seed;
    art.bank = build_bank(art.model, art.id_train_true, bc);

    std::vector<ScoreKind> kinds = config.score_kinds;
    for (auto& k : kinds)
        if (k.name == ScoreName::KNN || k.name == ScoreName::FusedKNN) k.k = config.eval.knn_k;
    art.report = build_report(art.model, art.id_train_true, art.id_test, art.ood_sets, kinds,
                              art.bank, threads);
    art.report.seed = config.seed;
    art.report.config_digest = config_digest(config);
    art.report.run_id = fs::path(config.output_dir).filename().string();

    // --- artifacts ---
    if (!out_dir.empty()) {
        fs::create_directories(fs::path(out_dir) / "plots");
        fs::create_directories(fs::path(out_dir) / "checkpoints");
        save_model(art.model, (fs::path(out_dir) / "model.json").string());
        for (const auto& ck : art.checkpoints)
            save_model(ck.model, (fs::path(out_dir) / "checkpoints" /
                                  ("epoch_" + std::to_string(ck.epoch) + ".json"))
                                     .string());
        save_history_csv(art.history, (fs::path(out_dir) / "history.csv").string());
        save_diagnostics_csv(art.diagnostics, (fs::path(out_dir) / "diagnostics.csv").string());

        std::string trend_csv = "checkpoint_epoch,mean_entropy,l1_auroc\n";
        char buf[128];
        for (const auto& tp : art.trend) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", tp.epoch, tp.mean_entropy,
                          tp.l1_auroc);
            trend_csv += buf;
        }
        write_text(fs::path(out_dir) / "trend.csv", trend_csv);

        // scores.csv over the concatenated id_test + OOD rows
        std::vector<std::string> names;
        std::vector<Vector> columns;
        std::vector<bool> is_ood;
        for (std::size_t i = 0; i < art.id_test.size(); ++i) is_ood.push_back(false);
        for (const auto& o : art.ood_sets)
            for (std::size_t i = 0; i < o.size(); ++i) is_ood.push_back(true);
        for (const auto& kind : kinds) {
            Vector col = score_dataset(art.model, art.id_test, kind, &art.bank, threads);
            for (const auto& o : art.ood_sets) {
                Vector so = score_dataset(art.model, o, kind, &art.bank, threads);
                col.insert(col.end(), so.begin(), so.end());
            }
            names.push_back(kind.label());
            columns.push_back(std::move(col));
        }
        save_scores_csv(names, columns, is_ood, (fs::path(out_dir) / "scores.csv").string());

        write_text(fs::path(out_dir) / "report.json", report_to_json(art.report));
        write_text(fs::path(out_dir) / "config.json", canonical_config(config));
        write_text(fs::path(out_dir) / "digest.txt", art.report.config_digest + "\n");

        // plots
        SvgSeries loss{"loss", {}, {}}, acc{"train_acc", {}, {}};
        for (const auto& h : art.history) {
            loss.x.push_back(static_cast<double>(h.epoch));
            loss.y.push_back(h.loss);
            acc.x.push_back(static_cast<double>(h.epoch));
            acc.y.push_back(h.accuracy);
        }
        write_line_chart((fs::path(out_dir) / "plots" / "history.svg").string(),
                         "training history", "epoch", "value", {loss, acc});
        SvgSeries hacc{"hidden_accuracy", {}, {}}, sdiff{"sign_diff", {}, {}};
        for (const auto& r : art.diagnostics) {
            hacc.x.push_back(static_cast<double>(r.checkpoint_epoch));
            hacc.y.push_back(r.stats.hidden_accuracy);
            sdiff.x.push_back(static_cast<double>(r.checkpoint_epoch));
            sdiff.y.push_back(r.stats.mean_sign_difference_target);
        }
        write_line_chart((fs::path(out_dir) / "plots" / "diagnostics.svg").string(),
                         "hidden classifier diagnostics", "checkpoint epoch", "value",
                         {hacc, sdiff});
        SvgSeries ent{"mean_entropy", {}, {}}, l1a{"l1_auroc", {}, {}};
        for (const auto& tp : art.trend) {
            ent.x.push_back(static_cast<double>(tp.epoch));
            ent.y.push_back(tp.mean_entropy);
            l1a.x.push_back(static_cast<double>(tp.epoch));
            l1a.y.push_back(tp.l1_auroc);
        }
        write_line_chart((fs::path(out_dir) / "plots" / "trend.svg").string(),
                         "activation entropy and norm separability", "checkpoint epoch", "value",
                         {ent, l1a});
    }
    return art;
}

}  // namespace nanlab
