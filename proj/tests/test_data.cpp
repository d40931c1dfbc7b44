#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "nanlab/data.hpp"
#include "nanlab/numcore.hpp"

using namespace nanlab;

namespace {

BlobsParams small_params() {
    BlobsParams p;
    p.classes = 4;
    p.dim = 6;
    p.n_per_class = 50;
    p.spread = 0.8;
    p.separation = 7.0;
    return p;
}

}  // namespace

TEST_CASE("gen_blobs basics") {
    BlobsParams p = small_params();
    Rng rng(3);
    Blobs b = gen_blobs(p, rng);
    CHECK(b.means.size() == 4);
    for (const auto& mu : b.means)
        CHECK(lp_norm(mu, 2.0) == doctest::Approx(7.0).epsilon(1e-9));
    CHECK(b.train.size() + b.test.size() == 200);
    CHECK(b.train.size() == 160);
    CHECK(b.test.size() == 40);
    CHECK(b.train.dim() == 6);
    CHECK(b.train.labeled());
    for (std::size_t y : b.train.labels) CHECK(y < 4);

    SUBCASE("same seed, same data") {
        Rng rng2(3);
        Blobs b2 = gen_blobs(p, rng2);
        CHECK(b.train.features == b2.train.features);
        CHECK(b.test.labels == b2.test.labels);
        CHECK(b.means == b2.means);
    }
    SUBCASE("different seed differs") {
        Rng rng2(4);
        Blobs b2 = gen_blobs(p, rng2);
        CHECK(b.train.features != b2.train.features);
    }
    SUBCASE("split is disjoint and exhaustive") {
        std::set<Vector> all;
        for (const auto& x : b.train.features) all.insert(x);
        for (const auto& x : b.test.features) all.insert(x);
        CHECK(all.size() == 200);
    }
    SUBCASE("well separated blobs are linearly separable") {
        for (std::size_t c = 0; c < 4; ++c) {
            std::vector<int> ys;
            for (std::size_t y : b.train.labels) ys.push_back(y == c ? 1 : -1);
            CHECK(testutil::perceptron_separable(b.train.features, ys));
        }
    }
}

TEST_CASE("gen_blobs parameter validation") {
    Rng rng(1);
    BlobsParams p = small_params();
    p.classes = 0;
    CHECK_THROWS_AS(gen_blobs(p, rng), InvalidParameter);
    p = small_params();
    p.dim = 1;
    CHECK_THROWS_AS(gen_blobs(p, rng), InvalidParameter);
    p = small_params();
    p.n_per_class = 0;
    CHECK_THROWS_AS(gen_blobs(p, rng), InvalidParameter);
}

TEST_CASE("single class blobs degenerate cleanly") {
    BlobsParams p = small_params();
    p.classes = 1;
    Rng rng(9);
    Blobs b = gen_blobs(p, rng);
    CHECK(b.means.size() == 1);
    for (std::size_t y : b.train.labels) CHECK(y == 0);
}

TEST_CASE("ood kinds") {
    for (const char* s : {"uniform_box", "shifted_gaussian", "scaled_gaussian", "interpolated"})
        CHECK(ood_kind_name(ood_kind_from_string(s)) == s);
    CHECK_THROWS_AS(ood_kind_from_string("nope"), InvalidParameter);
}

TEST_CASE("gen_ood families") {
    BlobsParams p = small_params();
    Rng rng(13);
    Blobs ref = gen_blobs(p, rng);
    Rng ood_rng(14);

    SUBCASE("uniform box containment") {
        // 1.5x bounding box of the reference, centered on it
        Vector lo(p.dim, kInfinityP), hi(p.dim, -kInfinityP);
        auto widen = [&](const Dataset& ds) {
            for (const auto& x : ds.features)
                for (std::size_t c = 0; c < p.dim; ++c) {
                    lo[c] = std::min(lo[c], x[c]);
                    hi[c] = std::max(hi[c], x[c]);
                }
        };
        widen(ref.train);
        widen(ref.test);
        OodParams op;
        op.kind = OodKind::UniformBox;
        op.n = 300;
        Dataset out = gen_ood(op, ref, p.spread, ood_rng);
        CHECK(out.size() == 300);
        CHECK(out.role == DatasetRole::Ood);
        for (const auto& x : out.features)
            for (std::size_t c = 0; c < p.dim; ++c) {
                double mid = 0.5 * (lo[c] + hi[c]);
                double half = 0.75 * (hi[c] - lo[c]);
                CHECK(x[c] >= mid - half - 1e-9);
                CHECK(x[c] <= mid + half + 1e-9);
            }
    }
    SUBCASE("shifted gaussian sits 4 spreads out") {
        OodParams op;
        op.kind = OodKind::ShiftedGaussian;
        op.n = 2000;
        Dataset out = gen_ood(op, ref, p.spread, ood_rng);
        // every sample's distance to the nearest reference mean should
        // concentrate around 4 * spread in the shift direction
        double mean_min_dist = 0.0;
        for (const auto& x : out.features) {
            double best = kInfinityP;
            for (const auto& mu : ref.means) best = std::min(best, std::sqrt(sq_dist(x, mu)));
            mean_min_dist += best;
        }
        mean_min_dist /= out.size();
        CHECK(mean_min_dist > 4.0 * p.spread - 3.0 * p.spread);
    }
    SUBCASE("scaled gaussian has inflated spread") {
        OodParams op;
        op.kind = OodKind::ScaledGaussian;
        op.n = 3000;
        op.scale = 9.0;
        Dataset out = gen_ood(op, ref, p.spread, ood_rng);
        double var = 0.0;
        std::size_t cnt = 0;
        for (const auto& x : out.features) {
            double best = kInfinityP;
            std::size_t arg = 0;
            for (std::size_t k = 0; k < ref.means.size(); ++k) {
                double d2 = sq_dist(x, ref.means[k]);
                if (d2 < best) {
                    best = d2;
                    arg = k;
                }
            }
            var += best / p.dim;
            (void)arg;
            ++cnt;
        }
        var /= cnt;
        // per-coordinate variance approx scale * spread^2 = 9 * 0.64
        CHECK(var == doctest::Approx(9.0 * 0.64).epsilon(0.15));
    }
    SUBCASE("interpolated points are cross-class convex combinations") {
        OodParams op;
        op.kind = OodKind::Interpolated;
        op.n = 100;
        Dataset out = gen_ood(op, ref, p.spread, ood_rng);
        // each output must be expressible as (1-t) x_i + t x_j with labels
        // differing; brute-force over all train pairs at desk scale
        const auto& xs = ref.train.features;
        for (const auto& q : out.features) {
            bool matched = false;
            for (std::size_t i = 0; i < xs.size() && !matched; ++i)
                for (std::size_t j = 0; j < xs.size() && !matched; ++j) {
                    if (ref.train.labels[i] == ref.train.labels[j]) continue;
                    // recover t from the first coordinate, then verify all
                    double denom = xs[j][0] - xs[i][0];
                    if (std::fabs(denom) < 1e-12) continue;
                    double t = (q[0] - xs[i][0]) / denom;
                    if (t < 0.3 - 1e-9 || t > 0.7 + 1e-9) continue;
                    bool all = true;
                    for (std::size_t c = 0; c < p.dim; ++c)
                        if (std::fabs((1 - t) * xs[i][c] + t * xs[j][c] - q[c]) > 1e-9)
                            all = false;
                    matched = all;
                }
            CHECK(matched);
        }
    }
}

TEST_CASE("ood generation is deterministic per stream") {
    BlobsParams p = small_params();
    Rng r1(17);
    Blobs ref = gen_blobs(p, r1);
    OodParams op;
    op.kind = OodKind::UniformBox;
    op.n = 50;
    Rng a(99), b(99);
    CHECK(gen_ood(op, ref, p.spread, a).features == gen_ood(op, ref, p.spread, b).features);
}

TEST_CASE("normalize_to_sphere equalizes norms") {
    Dataset ds;
    ds.features = {{3.0, 4.0}, {0.1, 0.0}, {-5.0, 12.0}};
    normalize_to_sphere(ds);
    for (const auto& x : ds.features)
        CHECK(lp_norm(x, 2.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    // direction preserved
    CHECK(ds.features[0][0] / ds.features[0][1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("csv round trip") {
    BlobsParams p = small_params();
    Rng rng(23);
    Blobs b = gen_blobs(p, rng);
    const std::string path = "data_test_out.csv";
    save_csv(b.train, path);
    Dataset back = load_csv(path);
    CHECK(back.features == b.train.features);
    CHECK(back.labels == b.train.labels);

    // unlabeled round trip
    Dataset bare = b.test;
    bare.labels.clear();
    save_csv(bare, path);
    Dataset back2 = load_csv(path);
    CHECK(back2.features == bare.features);
    CHECK_FALSE(back2.labeled());
    std::remove(path.c_str());
}

TEST_CASE("csv error reporting") {
    const std::string path = "data_test_bad.csv";
    auto write = [&](const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        f << text;
    };

    SUBCASE("missing file") { CHECK_THROWS_AS(load_csv("no_such_file.csv"), ParseError); }
    SUBCASE("bad header") {
        write("a,b\n1,2\n");
        CHECK_THROWS_AS(load_csv(path), ParseError);
    }
    SUBCASE("header only is a valid empty dataset") {
        write("f0,f1\n");
        Dataset d = load_csv(path);
        CHECK(d.size() == 0);
    }
    SUBCASE("ragged row names its line") {
        write("f0,f1\n1,2\n3\n");
        try {
            load_csv(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("3") != std::string::npos);
        }
    }
    SUBCASE("non-numeric cell") {
        write("f0,f1\n1,duck\n");
        CHECK_THROWS_AS(load_csv(path), ParseError);
    }
    std::remove(path.c_str());
}

TEST_CASE("dataset manifest carries the basics") {
    Dataset ds;
    ds.name = "id_train";
    ds.features = {{1.0, 2.0}, {3.0, 4.0}};
    ds.labels = {0, 1};
    std::string m = dataset_manifest(ds, "blobs", 77);
    CHECK(m.find("\"id_train\"") != std::string::npos);
    CHECK(m.find("\"blobs\"") != std::string::npos);
    CHECK(m.find("77") != std::string::npos);
}
