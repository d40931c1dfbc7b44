#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "nanlab/matrix.hpp"
#include "nanlab/rng.hpp"

namespace nanlab {

inline constexpr double kInfinityP = std::numeric_limits<double>::infinity();

// (sum |v_i|^p)^(1/p); p = infinity gives max |v_i|. p <= 0 is rejected.
double lp_norm(const Vector& v, double p);

// Number of strictly positive entries; zeros count as deactivated.
std::size_t active_count(const Vector& v);

// Entrywise sign with sign(0) = -1.
Vector sign_vec(const Vector& v);

// Max-subtracted stable softmax.
Vector softmax(const Vector& logits);

double logsumexp(const Vector& logits);

// Lower nearest-rank percentile: sorted value at index ceil(q/100 * n) - 1,
// clamped to [0, n-1].
double percentile(const Vector& values, double q);

struct KmeansResult {
    std::vector<Vector> centroids;
    std::vector<std::size_t> assignments;
    double objective = 0.0;  // within-cluster sum of squares at convergence
};

// k-means++ seeding followed by Lloyd iterations to an assignment fixpoint.
// Empty clusters are reseeded to the point farthest from its centroid.
KmeansResult kmeans(const std::vector<Vector>& points, std::size_t k, Rng& rng,
                    std::size_t max_iter = 100);

struct GaussianModel {
    std::vector<Vector> means;
    Matrix cov_inv;
    double shrinkage = 0.0;
    bool fitted = false;

    // Squared Mahalanobis distance to mean k.
    double sq_dist(const Vector& f, std::size_t k) const;
    // Minimum squared distance over all means.
    double min_sq_dist(const Vector& f) const;
};

// Class means plus one shared covariance
// Sigma = (1 - shrinkage) * pooled + shrinkage * (trace(pooled)/d) * I,
// inverted once via Cholesky.
GaussianModel fit_gaussian(const std::vector<std::vector<Vector>>& features_by_class,
                           double shrinkage);

struct PcaSubspace {
    Vector mean;
    Matrix basis;  // d x dim, orthonormal columns

    // l2 norm of the component of (f - mean) orthogonal to the subspace.
    double residual_norm(const Vector& f) const;
};

PcaSubspace pca_subspace(const std::vector<Vector>& features, std::size_t dim);

// Shared helpers used by a few modules.
double dot(const Vector& a, const Vector& b);
double sq_dist(const Vector& a, const Vector& b);
Vector normalized_l2(const Vector& v, double eps = 1e-12);

// Cholesky-based SPD inverse; throws NumericalFailure when not SPD.
Matrix spd_inverse(const Matrix& a);

// Jacobi eigendecomposition of a symmetric matrix; eigenvalues descending,
// eigenvectors as matching columns.
void symmetric_eigen(const Matrix& a, Vector& eigenvalues, Matrix& eigenvectors);

}  // namespace nanlab
