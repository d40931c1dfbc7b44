#include "nanlab/numcore.hpp"

#include <algorithm>
#include <cmath>

namespace nanlab {

double lp_norm(const Vector& v, double p) {
    if (!(p > 0.0)) throw InvalidParameter("lp_norm: p must be positive");
    if (p == kInfinityP) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::fabs(x));
        return m;
    }
    if (p == 1.0) {
        double s = 0.0;
        for (double x : v) s += std::fabs(x);
        return s;
    }
    if (p == 2.0) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }
    double s = 0.0;
    for (double x : v) s += std::pow(std::fabs(x), p);
    return std::pow(s, 1.0 / p);
}

std::size_t active_count(const Vector& v) {
    std::size_t c = 0;
    for (double x : v)
        if (x > 0.0) ++c;
    return c;
}

Vector sign_vec(const Vector& v) {
    Vector s(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) s[i] = v[i] > 0.0 ? 1.0 : -1.0;
    return s;
}

Vector softmax(const Vector& logits) {
    Vector p(logits.size());
    double m = -kInfinityP;
    for (double x : logits) m = std::max(m, x);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

double logsumexp(const Vector& logits) {
    double m = -kInfinityP;
    for (double x : logits) m = std::max(m, x);
    double z = 0.0;
    for (double x : logits) z += std::exp(x - m);
    return m + std::log(z);
}

double percentile(const Vector& values, double q) {
    if (values.empty()) throw InvalidParameter("percentile: empty input");
    if (q < 0.0 || q > 100.0) throw InvalidParameter("percentile: q outside [0,100]");
    Vector sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<long long>(sorted.size());
    long long idx = static_cast<long long>(std::ceil(q / 100.0 * static_cast<double>(n))) - 1;
    idx = std::clamp(idx, 0LL, n - 1);
    return sorted[static_cast<std::size_t>(idx)];
}

double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sq_dist(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Vector normalized_l2(const Vector& v, double eps) {
    double n = std::max(lp_norm(v, 2.0), eps);
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

namespace {

std::vector<std::size_t> assign_points(const std::vector<Vector>& points,
                                       const std::vector<Vector>& centroids) {
    std::vector<std::size_t> a(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = sq_dist(points[i], centroids[0]);
        for (std::size_t j = 1; j < centroids.size(); ++j) {
            double d = sq_dist(points[i], centroids[j]);
            if (d < best) {
                best = d;
                a[i] = j;
            }
        }
    }
    return a;
}

double wcss(const std::vector<Vector>& points, const std::vector<Vector>& centroids,
            const std::vector<std::size_t>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += sq_dist(points[i], centroids[a[i]]);
    return s;
}

}  // namespace

KmeansResult kmeans(const std::vector<Vector>& points, std::size_t k, Rng& rng,
                    std::size_t max_iter) {
    if (k < 1) throw InvalidParameter("kmeans: k must be >= 1");
    if (k > points.size()) throw InvalidParameter("kmeans: k exceeds number of points");
    const std::size_t n = points.size();
    const std::size_t d = points[0].size();

    // k-means++ seeding
    std::vector<Vector> centroids;
    centroids.push_back(points[rng.index(n)]);
    Vector d2(n);
    for (std::size_t j = 1; j < k; ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = sq_dist(points[i], centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c)
                best = std::min(best, sq_dist(points[i], centroids[c]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (r < acc) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = rng.index(n);
        }
        centroids.push_back(points[pick]);
    }

    std::vector<std::size_t> assign = assign_points(points, centroids);
    double prev_obj = wcss(points, centroids, assign);
    for (std::size_t it = 0; it < max_iter; ++it) {
        // update step
        std::vector<Vector> sums(k, Vector(d, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < d; ++c) sums[assign[i]][c] += points[i][c];
            ++counts[assign[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                // reseed to the point farthest from its current centroid
                std::size_t far = 0;
                double best = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double dd = sq_dist(points[i], centroids[assign[i]]);
                    if (dd > best) {
                        best = dd;
                        far = i;
                    }
                }
                centroids[j] = points[far];
            } else {
                for (std::size_t c = 0; c < d; ++c)
                    centroids[j][c] = sums[j][c] / static_cast<double>(counts[j]);
            }
        }
        std::vector<std::size_t> next = assign_points(points, centroids);
        double obj = wcss(points, centroids, next);
        bool fixpoint = (next == assign);
        assign = std::move(next);
        prev_obj = obj;
        if (fixpoint) break;
    }
    return {std::move(centroids), std::move(assign), prev_obj};
}

Matrix spd_inverse(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw InvalidParameter("spd_inverse: matrix not square");
    // Cholesky a = L L^T
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s))
                    throw NumericalFailure("spd_inverse: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    // Solve L L^T X = I column by column.
    Matrix inv(n, n);
    Vector y(n), x(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = (i == col) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
            y[i] = s / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
            x[ii] = s / l(ii, ii);
        }
        for (std::size_t i = 0; i < n; ++i) inv(i, col) = x[i];
    }
    return inv;
}

double GaussianModel::sq_dist(const Vector& f, std::size_t k) const {
    if (!fitted) throw InvalidState("GaussianModel: not fitted");
    const Vector& mu = means[k];
    Vector diff(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) diff[i] = f[i] - mu[i];
    Vector t = cov_inv.matvec(diff);
    return dot(diff, t);
}

double GaussianModel::min_sq_dist(const Vector& f) const {
    double best = sq_dist(f, 0);
    for (std::size_t k = 1; k < means.size(); ++k) best = std::min(best, sq_dist(f, k));
    return best;
}

GaussianModel fit_gaussian(const std::vector<std::vector<Vector>>& features_by_class,
                           double shrinkage) {
    if (shrinkage < 0.0 || shrinkage > 1.0)
        throw InvalidParameter("fit_gaussian: shrinkage outside [0,1]");
    std::size_t total = 0;
    for (const auto& cls : features_by_class) total += cls.size();
    if (total < 2) throw InvalidParameter("fit_gaussian: need at least 2 samples");

    std::size_t d = 0;
    for (const auto& cls : features_by_class)
        if (!cls.empty()) {
            d = cls[0].size();
            break;
        }
    if (d == 0) throw InvalidParameter("fit_gaussian: empty input");

    GaussianModel m;
    m.shrinkage = shrinkage;
    Matrix cov(d, d);
    for (const auto& cls : features_by_class) {
        if (cls.empty()) continue;
        Vector mu(d, 0.0);
        for (const auto& f : cls)
            for (std::size_t i = 0; i < d; ++i) mu[i] += f[i];
        for (std::size_t i = 0; i < d; ++i) mu[i] /= static_cast<double>(cls.size());
        for (const auto& f : cls) {
            for (std::size_t i = 0; i < d; ++i) {
                double di = f[i] - mu[i];
                for (std::size_t j = 0; j < d; ++j) cov(i, j) += di * (f[j] - mu[j]);
            }
        }
        m.means.push_back(std::move(mu));
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) cov(i, j) /= static_cast<double>(total);

    double tr = 0.0;
    for (std::size_t i = 0; i < d; ++i) tr += cov(i, i);
    const double ridge = shrinkage * tr / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) cov(i, j) *= (1.0 - shrinkage);
        cov(i, i) += ridge;
    }
    m.cov_inv = spd_inverse(cov);
    m.fitted = true;
    return m;
}

void symmetric_eigen(const Matrix& a, Vector& eigenvalues, Matrix& eigenvectors) {
    const std::size_t n = a.rows();
    Matrix s = a;
    Matrix v = Matrix::identity(n);
    for (std::size_t sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += s(i, j) * s(i, j);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(s(p, q)) < 1e-300) continue;
                double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    double sip = s(i, p), siq = s(i, q);
                    s(i, p) = c * sip - sn * siq;
                    s(i, q) = sn * sip + c * siq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double spi = s(p, i), sqi = s(q, i);
                    s(p, i) = c * spi - sn * sqi;
                    s(q, i) = sn * spi + c * sqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - sn * viq;
                    v(i, q) = sn * vip + c * viq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return s(i, i) > s(j, j); });
    eigenvalues.assign(n, 0.0);
    eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        eigenvalues[k] = s(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) eigenvectors(i, k) = v(i, order[k]);
    }
}

double PcaSubspace::residual_norm(const Vector& f) const {
    Vector centered(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) centered[i] = f[i] - mean[i];
    Vector coef = basis.tmatvec(centered);
    Vector proj = basis.matvec(coef);
    double s = 0.0;
    for (std::size_t i = 0; i < centered.size(); ++i) {
        double r = centered[i] - proj[i];
        s += r * r;
    }
    return std::sqrt(s);
}

PcaSubspace pca_subspace(const std::vector<Vector>& features, std::size_t dim) {
    if (features.empty()) throw InvalidParameter("pca_subspace: empty input");
    const std::size_t d = features[0].size();
    if (dim > d) throw InvalidParameter("pca_subspace: dim exceeds feature dimension");
    if (features.size() < dim + 1)
        throw InvalidParameter("pca_subspace: need at least dim+1 samples");

    PcaSubspace out;
    out.mean.assign(d, 0.0);
    for (const auto& f : features)
        for (std::size_t i = 0; i < d; ++i) out.mean[i] += f[i];
    for (std::size_t i = 0; i < d; ++i) out.mean[i] /= static_cast<double>(features.size());

    Matrix cov(d, d);
    for (const auto& f : features) {
        for (std::size_t i = 0; i < d; ++i) {
            double di = f[i] - out.mean[i];
            for (std::size_t j = 0; j < d; ++j) cov(i, j) += di * (f[j] - out.mean[j]);
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) cov(i, j) /= static_cast<double>(features.size());

    Vector evals;
    Matrix evecs;
    symmetric_eigen(cov, evals, evecs);
    out.basis = Matrix(d, dim);
    for (std::size_t k = 0; k < dim; ++k)
        for (std::size_t i = 0; i < d; ++i) out.basis(i, k) = evecs(i, k);
    return out;
}

}  // namespace nanlab
