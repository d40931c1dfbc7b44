#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nanlab/experiment.hpp"

namespace fs = std::filesystem;
using namespace nanlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitVerification = 4;

std::vector<ScoreKind> parse_kinds(const std::string& csv) {
    std::vector<ScoreKind> kinds;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) kinds.push_back(score_kind_from_string(tok));
    if (kinds.empty()) throw ConfigError("no score kinds given");
    return kinds;
}

ExperimentConfig load_config_with_overrides(const std::string& path, std::int64_t seed,
                                            const std::string& out) {
    ExperimentConfig cfg = load_experiment_config(path);
    if (seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.train.seed = cfg.seed;
    }
    if (!out.empty()) cfg.output_dir = out;
    return cfg;
}

int cmd_gen_data(const std::string& config_path, std::int64_t seed, const std::string& out) {
    ExperimentConfig cfg = load_config_with_overrides(config_path, seed, out);
    fs::create_directories(cfg.output_dir);
    Rng top(cfg.seed);
    Rng data_rng = top.split(1);
    Rng ood_rng = top.split(3);
    Blobs blobs = gen_blobs(cfg.data.blobs, data_rng);
    std::vector<Dataset> oods;
    for (const auto& op : cfg.ood_sets)
        oods.push_back(gen_ood(op, blobs, cfg.data.blobs.spread, ood_rng));
    if (cfg.data.generator == "blobs_unlabeled") {
        blobs.train.labels.clear();
        blobs.test.labels.clear();
    }
    if (cfg.data.normalize) {
        normalize_to_sphere(blobs.train);
        normalize_to_sphere(blobs.test);
        for (auto& o : oods) normalize_to_sphere(o);
    }
    auto dump = [&](const Dataset& ds, const std::string& stem, const std::string& kind) {
        save_csv(ds, (fs::path(cfg.output_dir) / (stem + ".csv")).string());
        std::ofstream mf(fs::path(cfg.output_dir) / (stem + ".manifest.json"));
        mf << dataset_manifest(ds, kind, cfg.seed);
    };
    dump(blobs.train, "id_train", "blobs");
    dump(blobs.test, "id_test", "blobs");
    for (const auto& o : oods) dump(o, "ood_" + o.name, o.name);
    std::cout << "wrote " << (2 + oods.size()) << " datasets to " << cfg.output_dir << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, std::int64_t seed, const std::string& out) {
    ExperimentConfig cfg = load_config_with_overrides(config_path, seed, out);
    ExperimentArtifacts art = run_experiment(cfg, cfg.output_dir);
    std::cout << "final loss " << art.history.back().loss << ", train accuracy "
              << art.history.back().accuracy << "; artifacts in " << cfg.output_dir << "\n";
    return kExitOk;
}

int cmd_verify(std::int64_t seed, std::size_t inputs, bool inject_fault) {
    VerifyReport rep = verify_suite(seed < 0 ? 7 : static_cast<std::uint64_t>(seed), inputs,
                                    inject_fault);
    std::printf("max decomposition residual: %.3e\n", rep.max_decomposition_residual);
    std::printf("max bound violation:        %.3e\n", rep.max_bound_violation);
    if (rep.ok) {
        std::cout << "verify: all identities and bounds hold\n";
        return kExitOk;
    }
    for (const auto& f : rep.failures)
        std::printf("FAIL depth=%zu activation=%s bias=%d layer=%zu check=%s value=%.3e\n",
                    f.depth, f.activation.c_str(), f.bias ? 1 : 0, f.layer, f.check.c_str(),
                    f.value);
    return kExitVerification;
}

BankIndex build_bank_from_csv(const MlpModel& model, const std::string& bank_path,
                              std::uint64_t seed) {
    Dataset bank_ds = load_csv(bank_path);
    BankConfig bc;
    bc.seed = seed;
    bc.ssd_clusters = bank_ds.labeled() ? std::max<std::size_t>(bank_ds.num_classes(), 1) : 5;
    return build_bank(model, bank_ds, bc);
}

int cmd_score(const std::string& model_path, const std::string& data_path,
              const std::string& kinds_csv, const std::string& bank_path,
              const std::string& out, std::size_t threads) {
    MlpModel model = load_model(model_path);
    Dataset ds = load_csv(data_path);
    std::vector<ScoreKind> kinds = parse_kinds(kinds_csv);
    BankIndex bank;
    bool have_bank = !bank_path.empty();
    if (have_bank) bank = build_bank_from_csv(model, bank_path, 0);
    for (const auto& k : kinds)
        if (kind_needs_bank(k) && !have_bank)
            throw ConfigError("score kind '" + k.label() + "' requires --bank");
    std::vector<std::string> names;
    std::vector<Vector> columns;
    for (const auto& k : kinds) {
        names.push_back(k.label());
        columns.push_back(score_dataset(model, ds, k, have_bank ? &bank : nullptr, threads));
    }
    std::vector<bool> is_ood(ds.size(), ds.role == DatasetRole::Ood);
    save_scores_csv(names, columns, is_ood, out);
    std::cout << "wrote " << ds.size() << " rows to " << out << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& id_train_path,
             const std::string& id_test_path, const std::vector<std::string>& ood_paths,
             const std::string& kinds_csv, const std::string& out, std::size_t threads) {
    MlpModel model = load_model(model_path);
    Dataset id_train = load_csv(id_train_path);
    id_train.role = DatasetRole::IdTrain;
    Dataset id_test = load_csv(id_test_path);
    id_test.role = DatasetRole::IdTest;
    std::vector<Dataset> oods;
    for (const auto& p : ood_paths) {
        Dataset o = load_csv(p);
        o.role = DatasetRole::Ood;
        o.name = fs::path(p).stem().string();
        oods.push_back(std::move(o));
    }
    BankIndex bank = build_bank_from_csv(model, id_train_path, 0);
    EvalReport rep =
        build_report(model, id_train, id_test, oods, parse_kinds(kinds_csv), bank, threads);
    rep.run_id = "eval";
    std::ofstream f(out, std::ios::binary);
    if (!f) throw InvalidParameter("cannot open " + out);
    f << report_to_json(rep);
    std::cout << "wrote report to " << out << "\n";
    return kExitOk;
}

int cmd_experiment(const std::string& config_path, std::int64_t seed, const std::string& out,
                   std::size_t threads) {
    ExperimentConfig cfg = load_config_with_overrides(config_path, seed, out);
    ExperimentArtifacts art = run_experiment(cfg, cfg.output_dir, threads);
    std::cout << "run " << art.report.run_id << " (digest " << art.report.config_digest
              << ") complete; report at " << (fs::path(cfg.output_dir) / "report.json").string()
              << "\n";
    return kExitOk;
}

int cmd_report(const std::string& run_dir) {
    std::ifstream f(fs::path(run_dir) / "report.json");
    if (!f) throw InvalidParameter("no report.json under " + run_dir);
    std::ostringstream ss;
    ss << f.rdbuf();
    EvalReport rep = report_from_json(ss.str());
    std::printf("run %s (seed %llu, digest %s)\n", rep.run_id.c_str(),
                static_cast<unsigned long long>(rep.seed), rep.config_digest.c_str());
    std::printf("id accuracy %.4f, mean entropy %.4f, mean sparsity %.4f\n", rep.id_accuracy,
                rep.mean_activation_entropy, rep.mean_sparsity_value);
    std::printf("%-24s %-18s %8s %8s %8s\n", "score", "ood set", "auroc", "fpr95", "train");
    for (const auto& c : rep.scores)
        std::printf("%-24s %-18s %8.4f %8.4f %8.4f\n", c.score_name.c_str(), c.ood_set.c_str(),
                    c.auroc, c.fpr95, c.train_auroc);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"out-of-distribution detection laboratory"};
    app.require_subcommand(1);

    std::string config_path, out, model_path, data_path, bank_path, kinds = "nan,l1";
    std::string id_train_path, id_test_path, run_dir;
    std::vector<std::string> ood_paths;
    std::int64_t seed = -1;
    std::size_t threads = 1, verify_inputs = 100;
    bool inject_fault = false;

    auto* gen = app.add_subcommand("gen-data", "generate the configured datasets as CSV");
    gen->add_option("--config", config_path)->required();
    gen->add_option("--seed", seed);
    gen->add_option("--out", out);

    auto* tr = app.add_subcommand("train", "run the training stage of a config");
    tr->add_option("--config", config_path)->required();
    tr->add_option("--seed", seed);
    tr->add_option("--out", out);

    auto* ver = app.add_subcommand("verify", "check decomposition identities and bounds");
    ver->add_option("--seed", seed);
    ver->add_option("--inputs", verify_inputs);
    ver->add_flag("--inject-fault", inject_fault,
                  "use a wrong GeLU ratio to prove the check can fail");

    auto* sc = app.add_subcommand("score", "score a CSV dataset with a trained model");
    sc->add_option("--model", model_path)->required();
    sc->add_option("--data", data_path)->required();
    sc->add_option("--kinds", kinds);
    sc->add_option("--bank", bank_path);
    sc->add_option("--out", out)->required();
    sc->add_option("--threads", threads);

    auto* ev = app.add_subcommand("eval", "build a metrics report from CSV datasets");
    ev->add_option("--model", model_path)->required();
    ev->add_option("--id-train", id_train_path)->required();
    ev->add_option("--id-test", id_test_path)->required();
    ev->add_option("--ood", ood_paths)->required();
    ev->add_option("--kinds", kinds);
    ev->add_option("--out", out)->required();
    ev->add_option("--threads", threads);

    auto* ex = app.add_subcommand("experiment", "full generate/train/score/eval pipeline");
    ex->add_option("--config", config_path)->required();
    ex->add_option("--seed", seed);
    ex->add_option("--out", out);
    ex->add_option("--threads", threads);

    auto* rp = app.add_subcommand("report", "print a run directory's report");
    rp->add_option("--run", run_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, seed, out);
        if (tr->parsed()) return cmd_train(config_path, seed, out);
        if (ver->parsed()) return cmd_verify(seed, verify_inputs, inject_fault);
        if (sc->parsed())
            return cmd_score(model_path, data_path, kinds, bank_path, out, threads);
        if (ev->parsed())
            return cmd_eval(model_path, id_train_path, id_test_path, ood_paths, kinds, out,
                            threads);
        if (ex->parsed()) return cmd_experiment(config_path, seed, out, threads);
        if (rp->parsed()) return cmd_report(run_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const InvalidState& e) {
        std::cerr << "invalid state: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
