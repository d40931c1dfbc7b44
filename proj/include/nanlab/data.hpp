#pragma once

#include <string>
#include <vector>

#include "nanlab/matrix.hpp"
#include "nanlab/rng.hpp"

namespace nanlab {

enum class DatasetRole { IdTrain, IdTest, Ood };

struct Dataset {
    std::string name;
    std::vector<Vector> features;
    std::vector<std::size_t> labels;  // empty when unlabeled
    DatasetRole role = DatasetRole::IdTrain;

    bool labeled() const { return !labels.empty(); }
    std::size_t size() const { return features.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features[0].size(); }
    std::size_t num_classes() const;
};

struct BlobsParams {
    std::size_t classes = 8;
    std::size_t dim = 32;
    std::size_t n_per_class = 250;
    double spread = 1.0;
    double separation = 6.0;
};

struct Blobs {
    Dataset train;
    Dataset test;
    std::vector<Vector> means;
};

// Class means on a sphere of radius `separation`, isotropic Gaussian samples
// of scale `spread`, shuffled and split 80/20 into train/test.
Blobs gen_blobs(const BlobsParams& params, Rng& rng);

enum class OodKind { UniformBox, ShiftedGaussian, ScaledGaussian, Interpolated };

OodKind ood_kind_from_string(const std::string& s);
std::string ood_kind_name(OodKind kind);

struct OodParams {
    OodKind kind = OodKind::UniformBox;
    std::size_t n = 500;
    double scale = 9.0;  // ScaledGaussian covariance multiplier
};

// Reference-derived OOD families: 1.5x bounding box, means shifted by
// 4 x spread, covariance scaled, or cross-class convex combinations.
Dataset gen_ood(const OodParams& params, const Blobs& reference, double spread, Rng& rng);

// Projects every sample onto the sphere of radius sqrt(d), equalizing input
// norms so norm-based scores start at chance for untrained nets.
void normalize_to_sphere(Dataset& ds);

Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

std::string dataset_manifest(const Dataset& ds, const std::string& kind,
                             std::uint64_t seed);

}  // namespace nanlab
