#include "nanlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nanlab/common.hpp"
#include "nanlab/numcore.hpp"

namespace nanlab {

std::size_t Dataset::num_classes() const {
    std::size_t k = 0;
    for (std::size_t y : labels) k = std::max(k, y + 1);
    return k;
}

Blobs gen_blobs(const BlobsParams& params, Rng& rng) {
    if (params.classes < 1) throw InvalidParameter("gen_blobs: classes must be >= 1");
    if (params.dim < 2) throw InvalidParameter("gen_blobs: dim must be >= 2");
    if (params.n_per_class < 1) throw InvalidParameter("gen_blobs: n_per_class must be >= 1");

    Blobs out;
    for (std::size_t k = 0; k < params.classes; ++k) {
        Vector mu(params.dim);
        for (double& v : mu) v = rng.normal();
        double n = std::max(lp_norm(mu, 2.0), 1e-12);
        for (double& v : mu) v *= params.separation / n;
        out.means.push_back(std::move(mu));
    }

    std::vector<Vector> features;
    std::vector<std::size_t> labels;
    for (std::size_t k = 0; k < params.classes; ++k) {
        for (std::size_t i = 0; i < params.n_per_class; ++i) {
            Vector x(params.dim);
            for (std::size_t c = 0; c < params.dim; ++c)
                x[c] = out.means[k][c] + params.spread * rng.normal();
            features.push_back(std::move(x));
            labels.push_back(k);
        }
    }
    std::vector<std::size_t> perm = rng.permutation(features.size());
    const std::size_t n_train = static_cast<std::size_t>(0.8 * static_cast<double>(features.size()));
    out.train.name = "blobs_train";
    out.train.role = DatasetRole::IdTrain;
    out.test.name = "blobs_test";
    out.test.role = DatasetRole::IdTest;
    for (std::size_t i = 0; i < features.size(); ++i) {
        Dataset& dst = (i < n_train) ? out.train : out.test;
        dst.features.push_back(features[perm[i]]);
        dst.labels.push_back(labels[perm[i]]);
    }
    return out;
}

OodKind ood_kind_from_string(const std::string& s) {
    if (s == "uniform_box") return OodKind::UniformBox;
    if (s == "shifted_gaussian") return OodKind::ShiftedGaussian;
    if (s == "scaled_gaussian") return OodKind::ScaledGaussian;
    if (s == "interpolated") return OodKind::Interpolated;
    throw InvalidParameter("unknown OOD kind '" + s + "'");
}

std::string ood_kind_name(OodKind kind) {
    switch (kind) {
        case OodKind::UniformBox:
            return "uniform_box";
        case OodKind::ShiftedGaussian:
            return "shifted_gaussian";
        case OodKind::ScaledGaussian:
            return "scaled_gaussian";
        case OodKind::Interpolated:
            return "interpolated";
    }
    return "uniform_box";
}

Dataset gen_ood(const OodParams& params, const Blobs& reference, double spread, Rng& rng) {
    const Dataset& ref = reference.train;
    if (ref.features.empty()) throw InvalidParameter("gen_ood: empty reference");
    const std::size_t d = ref.dim();
    Dataset out;
    out.name = ood_kind_name(params.kind);
    out.role = DatasetRole::Ood;

    switch (params.kind) {
        case OodKind::UniformBox: {
            Vector lo = ref.features[0], hi = ref.features[0];
            for (const auto& f : ref.features)
                for (std::size_t c = 0; c < d; ++c) {
                    lo[c] = std::min(lo[c], f[c]);
                    hi[c] = std::max(hi[c], f[c]);
                }
            for (std::size_t i = 0; i < params.n; ++i) {
                Vector x(d);
                for (std::size_t c = 0; c < d; ++c) {
                    double center = 0.5 * (lo[c] + hi[c]);
                    double half = 0.5 * (hi[c] - lo[c]);
                    x[c] = center + rng.uniform(-1.0, 1.0) * 1.5 * half;
                }
                out.features.push_back(std::move(x));
            }
            break;
        }
        case OodKind::ShiftedGaussian: {
            for (std::size_t i = 0; i < params.n; ++i) {
                const Vector& mu = reference.means[rng.index(reference.means.size())];
                Vector dir(d);
                for (double& v : dir) v = rng.normal();
                double n = std::max(lp_norm(dir, 2.0), 1e-12);
                Vector x(d);
                for (std::size_t c = 0; c < d; ++c)
                    x[c] = mu[c] + dir[c] / n * 4.0 * spread + spread * rng.normal();
                out.features.push_back(std::move(x));
            }
            break;
        }
        case OodKind::ScaledGaussian: {
            const double s = std::sqrt(params.scale);
            for (std::size_t i = 0; i < params.n; ++i) {
                const Vector& mu = reference.means[rng.index(reference.means.size())];
                Vector x(d);
                for (std::size_t c = 0; c < d; ++c) x[c] = mu[c] + s * spread * rng.normal();
                out.features.push_back(std::move(x));
            }
            break;
        }
        case OodKind::Interpolated: {
            if (!ref.labeled())
                throw InvalidParameter("gen_ood: interpolated needs a labeled reference");
            while (out.features.size() < params.n) {
                std::size_t i = rng.index(ref.size());
                std::size_t j = rng.index(ref.size());
                if (ref.labels[i] == ref.labels[j]) continue;
                double t = rng.uniform(0.3, 0.7);
                Vector x(d);
                for (std::size_t c = 0; c < d; ++c)
                    x[c] = t * ref.features[i][c] + (1.0 - t) * ref.features[j][c];
                out.features.push_back(std::move(x));
            }
            break;
        }
    }
    return out;
}

void normalize_to_sphere(Dataset& ds) {
    if (ds.features.empty()) return;
    const double target = std::sqrt(static_cast<double>(ds.dim()));
    for (auto& f : ds.features) {
        double n = std::max(lp_norm(f, 2.0), 1e-12);
        for (double& v : f) v *= target / n;
    }
}

namespace {

double parse_cell(const std::string& cell, std::size_t line_no) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ParseError("line " + std::to_string(line_no) + ": invalid number '" + cell + "'");
    return v;
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError(path + ": missing header row");

    std::vector<std::string> header = split_row(line);
    bool has_label = !header.empty() && header.back() == "label";
    const std::size_t d = header.size() - (has_label ? 1 : 0);
    if (d == 0) throw ParseError(path + ": header has no feature columns");
    for (std::size_t c = 0; c < d; ++c)
        if (header[c] != "f" + std::to_string(c))
            throw ParseError(path + ": header column " + std::to_string(c) +
                             " must be 'f" + std::to_string(c) + "', got '" + header[c] + "'");

    Dataset ds;
    ds.name = path;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_row(line);
        if (cells.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        Vector x(d);
        for (std::size_t c = 0; c < d; ++c) x[c] = parse_cell(cells[c], line_no);
        ds.features.push_back(std::move(x));
        if (has_label) {
            double lv = parse_cell(cells[d], line_no);
            if (lv < 0.0 || lv != std::floor(lv))
                throw ParseError("line " + std::to_string(line_no) + ": label must be a non-negative integer");
            ds.labels.push_back(static_cast<std::size_t>(lv));
        }
    }
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("save_csv: cannot open " + path);
    const std::size_t d = ds.dim();
    for (std::size_t c = 0; c < d; ++c) f << (c ? ",f" : "f") << c;
    if (ds.labeled()) f << ",label";
    f << "\n";
    char buf[40];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.features[i][c]);
            if (c) f << ',';
            f << buf;
        }
        if (ds.labeled()) f << ',' << ds.labels[i];
        f << "\n";
    }
}

std::string dataset_manifest(const Dataset& ds, const std::string& kind, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["name"] = ds.name;
    j["kind"] = kind;
    j["seed"] = seed;
    j["n"] = ds.size();
    j["d"] = ds.dim();
    j["labeled"] = ds.labeled();
    return j.dump(2) + "\n";
}

}  // namespace nanlab
