#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cctype>
#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "nanlab/config.hpp"

using namespace nanlab;

namespace {

const char* kBaseConfig = R"({
  "seed": 11,
  "data": {
    "generator": "blobs",
    "classes": 3, "dim": 8, "n_per_class": 40, "spread": 1.0, "separation": 6.0,
    "normalize": true
  },
  "ood": [
    {"kind": "uniform_box", "n": 100},
    {"kind": "scaled_gaussian", "n": 100, "scale": 4.0}
  ],
  "model": {
    "hidden_dims": [16, 16],
    "activation": "relu",
    "use_bias": true,
    "temperature": 0.1
  },
  "train": {
    "epochs": 5,
    "batch_size": 16,
    "lr0": 0.05,
    "scheme": "S",
    "checkpoint_stride": 2
  },
  "scores": ["nan", "l1", "msp"],
  "eval": {"knn_k": 5, "ssd_clusters": 3},
  "output": {"dir": "runs/unit"}
})";

}  // namespace

TEST_CASE("parse a full config") {
    ExperimentConfig c = parse_experiment_config(kBaseConfig);
    CHECK(c.seed == 11);
    CHECK(c.data.generator == "blobs");
    CHECK(c.data.blobs.classes == 3);
    CHECK(c.data.blobs.dim == 8);
    CHECK(c.data.normalize);
    REQUIRE(c.ood_sets.size() == 2);
    CHECK(c.ood_sets[0].kind == OodKind::UniformBox);
    CHECK(c.ood_sets[1].scale == 4.0);
    CHECK(c.model.hidden_dims == std::vector<std::size_t>{16, 16});
    CHECK(c.model.use_bias);
    CHECK(c.train.epochs == 5);
    CHECK(c.train.scheme == LabelScheme::S);
    CHECK(c.train.seed == 11);  // propagated from the top seed
    REQUIRE(c.score_kinds.size() == 3);
    CHECK(c.score_kinds[0].label() == "nan");
    CHECK(c.eval.knn_k == 5);
    CHECK(c.output_dir == "runs/unit");
}

TEST_CASE("defaults fill unspecified sections") {
    ExperimentConfig c = parse_experiment_config(R"({"seed": 1, "scores": ["nan"]})");
    CHECK(c.model.hidden_dims == std::vector<std::size_t>{128, 128});
    CHECK(c.model.temperature == 0.1);
    CHECK(c.train.epochs == 200);
    CHECK(c.eval.react_percentile == 90.0);
    CHECK(c.data.generator == "blobs");
}

TEST_CASE("structured score entries carry their parameters") {
    ExperimentConfig c = parse_experiment_config(
        R"({"seed": 1, "scores": [{"kind": "knn", "k": 7}, {"kind": "l1", "react": true}]})");
    REQUIRE(c.score_kinds.size() == 2);
    CHECK(c.score_kinds[0].k == 7);
    CHECK(c.score_kinds[1].react);
    CHECK(c.score_kinds[1].label() == "l1_react");
}

TEST_CASE("unknown keys are rejected with their path") {
    std::string bad = R"({"seed": 1, "scores": ["nan"], "trian": {"epochs": 5}})";
    try {
        parse_experiment_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("trian") != std::string::npos);
    }
    std::string nested = R"({"seed": 1, "scores": ["nan"], "train": {"epochz": 5}})";
    try {
        parse_experiment_config(nested);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        CHECK(msg.find("epochz") != std::string::npos);
        CHECK(msg.find("train") != std::string::npos);
    }
}

TEST_CASE("malformed json is a config error") {
    CHECK_THROWS_AS(parse_experiment_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config("[]"), ConfigError);
}

TEST_CASE("semantic validation names the offending keys") {
    std::string conflict =
        R"({"seed": 1, "scores": ["nan"], "data": {"generator": "blobs_unlabeled"},
            "train": {"scheme": "S"}})";
    try {
        parse_experiment_config(conflict);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        CHECK(msg.find("scheme") != std::string::npos);
        CHECK(msg.find("generator") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_experiment_config(
                        R"({"seed": 1, "scores": ["nan"], "model": {"temperature": 0.0}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(
                        R"({"seed": 1, "scores": ["nan"], "train": {"batch_size": 0}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(
                        R"({"seed": 1, "scores": ["nan"], "data": {"generator": "parquet"}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"seed": 1, "scores": ["bogus"]})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"seed": 1, "scores": []})"), ConfigError);
}

TEST_CASE("digest is stable under reformatting") {
    ExperimentConfig a = parse_experiment_config(kBaseConfig);
    // same content, different whitespace and key order
    std::string shuffled = R"({
      "output": {"dir": "runs/unit"},
      "eval": {"ssd_clusters": 3, "knn_k": 5},
      "scores": ["nan", "l1", "msp"],
      "train": {"checkpoint_stride": 2, "scheme": "S", "lr0": 0.05,
                "batch_size": 16, "epochs": 5},
      "model": {"temperature": 0.1, "use_bias": true, "activation": "relu",
                "hidden_dims": [16, 16]},
      "ood": [{"n": 100, "kind": "uniform_box"},
              {"scale": 4.0, "n": 100, "kind": "scaled_gaussian"}],
      "data": {"normalize": true, "separation": 6.0, "spread": 1.0,
               "n_per_class": 40, "dim": 8, "classes": 3, "generator": "blobs"},
      "seed": 11
    })";
    ExperimentConfig b = parse_experiment_config(shuffled);
    CHECK(canonical_config(a) == canonical_config(b));
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a).size() == 16);
    for (char ch : config_digest(a)) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));

    // any content change moves the digest
    ExperimentConfig c = a;
    c.seed = 12;
    CHECK(config_digest(c) != config_digest(a));
    ExperimentConfig d = a;
    d.train.lr0 = 0.06;
    CHECK(config_digest(d) != config_digest(a));
}

TEST_CASE("canonical form reparses to the same digest") {
    ExperimentConfig a = parse_experiment_config(kBaseConfig);
    // canonical_config uses structured score entries; a reparse must agree
    std::string canon = canonical_config(a);
    ExperimentConfig b = parse_experiment_config(canon);
    CHECK(config_digest(b) == config_digest(a));
}

TEST_CASE("load_experiment_config reads files and reports missing ones") {
    const std::string path = "config_test_tmp.json";
    {
        std::ofstream f(path, std::ios::binary);
        f << kBaseConfig;
    }
    ExperimentConfig c = load_experiment_config(path);
    CHECK(c.seed == 11);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_experiment_config("definitely_missing.json"), ConfigError);
}
