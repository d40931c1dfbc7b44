#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "nanlab/eval.hpp"

using namespace nanlab;

TEST_CASE("auroc hand examples") {
    CHECK(auroc({2, 3}, {0, 1}) == 1.0);
    CHECK(auroc({1, 3}, {2, 4}) == 0.25);
    CHECK(auroc({1, 1}, {1, 1}) == 0.5);
    CHECK(auroc({0, 1}, {2, 3}) == 0.0);
    CHECK_THROWS_AS(auroc({}, {1.0}), InvalidParameter);
    CHECK_THROWS_AS(auroc({1.0}, {}), InvalidParameter);
}

TEST_CASE("auroc equals pair counting on randomized sets with ties") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng.index(30);
        std::size_t m = 1 + rng.index(30);
        Vector id(n), ood(m);
        // coarse grid forces plenty of ties
        for (double& v : id) v = static_cast<double>(rng.index(8));
        for (double& v : ood) v = static_cast<double>(rng.index(8));
        CHECK(auroc(id, ood) == testutil::auroc_brute(id, ood));
        CHECK(fpr95(id, ood) == testutil::fpr95_brute(id, ood));
    }
}

TEST_CASE("auroc complement and monotone invariance") {
    Rng rng(9);
    Vector id(25), ood(18);
    for (double& v : id) v = rng.normal();
    for (double& v : ood) v = rng.normal() - 0.5;
    CHECK(auroc(id, ood) + auroc(ood, id) == doctest::Approx(1.0).epsilon(1e-12));
    Vector id2 = id, ood2 = ood;
    auto squash = [](double v) { return std::tanh(v) * 3.0 + v * 0.01; };
    for (double& v : id2) v = squash(v);
    for (double& v : ood2) v = squash(v);
    CHECK(auroc(id, ood) == doctest::Approx(auroc(id2, ood2)).epsilon(1e-12));
}

TEST_CASE("fpr95 hand examples") {
    Vector id;
    for (int i = 1; i <= 20; ++i) id.push_back(i);
    CHECK(fpr95(id, {0.0, 1.5, 3.0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(fpr95(id, {-5.0, -2.0}) == 0.0);
    CHECK(fpr95(id, id) >= 0.95);
}

TEST_CASE("activation entropy") {
    std::vector<Vector> acts = {{1.0, 1.0, 0.0}, {-1.0, 1.0, 0.0}};
    ActivationEntropy e = activation_entropy(acts);
    CHECK(e.per_unit.size() == 3);
    CHECK(e.per_unit[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));  // half active
    CHECK(e.per_unit[1] == 0.0);                                            // always active
    CHECK(e.per_unit[2] == 0.0);                                            // never active
    CHECK(e.mean == doctest::Approx(std::log(2.0) / 3.0).epsilon(1e-12));
    for (double h : e.per_unit) {
        CHECK(h >= 0.0);
        CHECK(h <= std::log(2.0) + 1e-12);
    }
    CHECK_THROWS_AS(activation_entropy({}), InvalidParameter);
}

TEST_CASE("mean sparsity") {
    CHECK(mean_sparsity({{1, 1, 1, 1}}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(mean_sparsity({{1, 1, 0, -1}}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mean_sparsity({{0, 0, -3}}) == 1.0);
    CHECK(mean_sparsity({{1, 1, 1, 1}, {0, 0, 0, 0}}) ==
          doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("spearman") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman({1, 2, 3, 4}, {5, 4, 3, 2}) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(spearman({1, 2, 3}, {2, 1, 3}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(spearman({1, 2, 3}, {1, 2}), InvalidParameter);
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2}), InvalidParameter);
}

namespace {

Dataset gaussian_set(std::size_t n, std::size_t d, double shift, std::uint64_t seed,
                     bool labeled) {
    Dataset ds;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Vector x(d);
        for (double& v : x) v = rng.normal() + shift;
        ds.features.push_back(x);
        if (labeled) ds.labels.push_back(i % 2);
    }
    return ds;
}

}  // namespace

TEST_CASE("null-case report sits at chance") {
    Rng mr(11);
    MlpModel m = build_mlp({6, 16, 12}, ActivationKind::relu(), true, 2, 0.1, mr);
    Dataset id_train = gaussian_set(150, 6, 0.0, 12, true);
    Dataset id_test = gaussian_set(150, 6, 0.0, 13, true);
    id_test.role = DatasetRole::IdTest;
    Dataset resample = gaussian_set(150, 6, 0.0, 14, false);
    resample.role = DatasetRole::Ood;
    resample.name = "resample";
    BankConfig bc;
    bc.ssd_clusters = 2;
    bc.seed = 3;
    BankIndex bank = build_bank(m, id_train, bc);
    std::vector<ScoreKind> kinds = {score_kind_from_string("nan"),
                                    score_kind_from_string("l1"),
                                    score_kind_from_string("knn")};
    EvalReport rep = build_report(m, id_train, id_test, {resample}, kinds, bank);
    REQUIRE(rep.scores.size() == 3);
    for (const auto& c : rep.scores) {
        CHECK(c.auroc == doctest::Approx(0.5).epsilon(0.12));
        CHECK(c.auroc >= 0.0);
        CHECK(c.auroc <= 1.0);
        CHECK(c.fpr95 >= 0.0);
        CHECK(c.fpr95 <= 1.0);
    }
    CHECK(rep.mean_activation_entropy >= 0.0);
    CHECK(rep.mean_sparsity_value > 0.0);
}

TEST_CASE("shifted ood is separable by distance scores") {
    Rng mr(21);
    MlpModel m = build_mlp({6, 16, 12}, ActivationKind::relu(), true, 2, 0.1, mr);
    Dataset id_train = gaussian_set(200, 6, 0.0, 22, true);
    Dataset id_test = gaussian_set(120, 6, 0.0, 23, true);
    Dataset far = gaussian_set(120, 6, 25.0, 24, false);
    far.role = DatasetRole::Ood;
    far.name = "far";
    BankConfig bc;
    bc.ssd_clusters = 2;
    BankIndex bank = build_bank(m, id_train, bc);
    std::vector<ScoreKind> kinds = {score_kind_from_string("mahalanobis"),
                                    score_kind_from_string("knn")};
    EvalReport rep = build_report(m, id_train, id_test, {far}, kinds, bank);
    for (const auto& c : rep.scores) {
        CHECK(c.auroc > 0.95);
        CHECK(c.fpr95 < 0.2);
    }
}

TEST_CASE("report json round-trips") {
    EvalReport rep;
    rep.run_id = "unit";
    rep.seed = 42;
    rep.config_digest = "deadbeefdeadbeef";
    rep.id_accuracy = 0.875;
    rep.mean_activation_entropy = 0.3219;
    rep.mean_sparsity_value = 0.0625;
    ScoreCell c;
    c.score_name = "nan";
    c.ood_set = "uniform_box";
    c.auroc = 0.91;
    c.fpr95 = 0.25;
    c.train_auroc = 0.97;
    rep.scores.push_back(c);
    c.score_name = "l1";
    c.auroc = 0.5;
    rep.scores.push_back(c);

    EvalReport back = report_from_json(report_to_json(rep));
    CHECK(back.run_id == rep.run_id);
    CHECK(back.seed == rep.seed);
    CHECK(back.config_digest == rep.config_digest);
    CHECK(back.id_accuracy == rep.id_accuracy);
    CHECK(back.mean_activation_entropy == rep.mean_activation_entropy);
    CHECK(back.mean_sparsity_value == rep.mean_sparsity_value);
    REQUIRE(back.scores.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.scores[i].score_name == rep.scores[i].score_name);
        CHECK(back.scores[i].ood_set == rep.scores[i].ood_set);
        CHECK(back.scores[i].auroc == rep.scores[i].auroc);
        CHECK(back.scores[i].fpr95 == rep.scores[i].fpr95);
        CHECK(back.scores[i].train_auroc == rep.scores[i].train_auroc);
    }
    CHECK(report_to_json(back) == report_to_json(rep));
    CHECK_THROWS_AS(report_from_json("{"), ParseError);
}
