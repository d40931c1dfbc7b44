#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nanlab/experiment.hpp"

using namespace nanlab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quick_config() {
    return parse_experiment_config(R"({
      "seed": 5,
      "data": {
        "generator": "blobs",
        "classes": 3, "dim": 8, "n_per_class": 30, "spread": 1.0, "separation": 6.0,
        "normalize": true
      },
      "ood": [{"kind": "uniform_box", "n": 60},
              {"kind": "shifted_gaussian", "n": 60}],
      "model": {"hidden_dims": [16, 16], "activation": "relu", "use_bias": true,
                "temperature": 0.1},
      "train": {"epochs": 4, "batch_size": 24, "lr0": 0.05, "scheme": "S",
                "checkpoint_stride": 2},
      "scores": ["nan", "l1", "msp", "knn", "fused_knn", "nan_react"],
      "eval": {"knn_k": 3, "ssd_clusters": 3},
      "output": {"dir": "runs/unit_exp"}
    })");
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("verify suite passes on random nets") {
    VerifyReport rep = verify_suite(7, 40);
    CHECK(rep.ok);
    CHECK(rep.failures.empty());
    CHECK(rep.max_decomposition_residual < 1e-9);
    CHECK(rep.max_bound_violation < 1e-9);
    // the verdict is seed-robust
    CHECK(verify_suite(8, 40).ok);
    CHECK(verify_suite(1234, 40).ok);
}

TEST_CASE("injected gelu fault is caught and named") {
    VerifyReport rep = verify_suite(7, 40, true);
    CHECK_FALSE(rep.ok);
    REQUIRE_FALSE(rep.failures.empty());
    for (const auto& f : rep.failures) CHECK(f.activation == "gelu");
}

TEST_CASE("end-to-end experiment run") {
    ExperimentConfig cfg = quick_config();
    fs::remove_all(cfg.output_dir);
    ExperimentArtifacts art = run_experiment(cfg, cfg.output_dir);

    SUBCASE("artifacts on disk") {
        fs::path out(cfg.output_dir);
        for (const char* name :
             {"model.json", "history.csv", "diagnostics.csv", "trend.csv", "scores.csv",
              "report.json", "config.json", "digest.txt"})
            CHECK(fs::exists(out / name));
        CHECK(fs::exists(out / "checkpoints" / "epoch_0.json"));
        CHECK(fs::exists(out / "checkpoints" / "epoch_2.json"));
        CHECK(fs::exists(out / "checkpoints" / "epoch_4.json"));
        CHECK(fs::exists(out / "plots" / "history.svg"));
        CHECK(fs::exists(out / "plots" / "diagnostics.svg"));
        CHECK(fs::exists(out / "plots" / "trend.svg"));
        // digest file matches the canonical config digest
        std::string digest = slurp(out / "digest.txt");
        CHECK(digest.find(config_digest(cfg)) != std::string::npos);
    }
    SUBCASE("in-memory artifacts are coherent") {
        CHECK(art.history.size() == 4);
        CHECK(art.checkpoints.size() == 3);
        CHECK(art.trend.size() == art.checkpoints.size());
        CHECK(art.ood_sets.size() == 2);
        // one cell per (score kind, ood set)
        CHECK(art.report.scores.size() == 6 * 2);
        CHECK(art.report.seed == 5);
        CHECK(art.report.config_digest == config_digest(cfg));
        for (const auto& c : art.report.scores) {
            CHECK(c.auroc >= 0.0);
            CHECK(c.auroc <= 1.0);
            CHECK(c.fpr95 >= 0.0);
            CHECK(c.fpr95 <= 1.0);
        }
        // saved model reloads to the same bits
        MlpModel reloaded = load_model((fs::path(cfg.output_dir) / "model.json").string());
        CHECK(serialize_model(reloaded) == serialize_model(art.model));
    }
    SUBCASE("reruns are byte-identical") {
        std::string run_dir2 = "runs/unit_exp_replay";
        fs::remove_all(run_dir2);
        run_experiment(cfg, run_dir2);
        for (const char* name : {"model.json", "history.csv", "diagnostics.csv", "trend.csv",
                                 "scores.csv", "report.json"})
            CHECK(slurp(fs::path(cfg.output_dir) / name) == slurp(fs::path(run_dir2) / name));
        fs::remove_all(run_dir2);
    }
    SUBCASE("thread count does not change any output") {
        std::string run_dir2 = "runs/unit_exp_mt";
        fs::remove_all(run_dir2);
        run_experiment(cfg, run_dir2, 2);
        CHECK(slurp(fs::path(cfg.output_dir) / "scores.csv") ==
              slurp(fs::path(run_dir2) / "scores.csv"));
        CHECK(slurp(fs::path(cfg.output_dir) / "report.json") ==
              slurp(fs::path(run_dir2) / "report.json"));
        fs::remove_all(run_dir2);
    }
    fs::remove_all(cfg.output_dir);
}

TEST_CASE("label-free scheme runs without ground-truth labels") {
    ExperimentConfig cfg = quick_config();
    cfg.data.generator = "blobs_unlabeled";
    cfg.train.scheme = LabelScheme::O;
    cfg.output_dir = "runs/unit_exp_o";
    cfg.score_kinds = {score_kind_from_string("nan"), score_kind_from_string("l1")};
    fs::remove_all(cfg.output_dir);
    ExperimentArtifacts art = run_experiment(cfg, cfg.output_dir);
    CHECK(art.id_train.num_classes() == 1);
    CHECK(art.report.scores.size() == 2 * 2);
    fs::remove_all(cfg.output_dir);
}

TEST_CASE("trend rows track the checkpoint epochs") {
    ExperimentConfig cfg = quick_config();
    cfg.train.epochs = 3;
    cfg.train.checkpoint_stride = 1;
    cfg.output_dir = "runs/unit_exp_trend";
    fs::remove_all(cfg.output_dir);
    ExperimentArtifacts art = run_experiment(cfg, cfg.output_dir);
    REQUIRE(art.trend.size() == 4);  // epochs 0..3
    for (std::size_t i = 0; i < art.trend.size(); ++i) {
        CHECK(art.trend[i].epoch == i);
        CHECK(art.trend[i].mean_entropy >= 0.0);
        CHECK(art.trend[i].l1_auroc >= 0.0);
        CHECK(art.trend[i].l1_auroc <= 1.0);
    }
    fs::remove_all(cfg.output_dir);
}
