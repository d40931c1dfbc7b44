#include "nanlab/hidden.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace nanlab {

namespace {

// Effective final weight for one trace: row k is the direction that turns
// a^(L) into logit k, with the cosine scaling (1 / (T |w_k| |g|)) folded in
// and the projection matrix absorbed. A dead embedding gives the zero matrix,
// matching the all-zero logits of forward().
Matrix effective_final_weight(const MlpModel& model, const ForwardTrace& trace) {
    const std::size_t K = model.num_classes();
    const std::size_t dL = model.last_hidden_dim();
    Matrix m(K, dL);
    const double gn = lp_norm(trace.g, 2.0);
    if (gn == 0.0) return m;
    for (std::size_t k = 0; k < K; ++k) {
        const Vector& w = model.prototypes[k];
        const double scale = 1.0 / (model.temperature * lp_norm(w, 2.0) * gn);
        Vector row = model.has_projection ? model.projection.matvec(w) : w;
        for (std::size_t i = 0; i < dL; ++i) m(k, i) = row[i] * scale;
    }
    return m;
}

void check_trace(const MlpModel& model, const ForwardTrace& trace) {
    if (trace.a.size() != model.num_layers() || trace.x.size() != model.input_dim())
        throw InvalidParameter("hidden: trace does not match model");
}

// Walks the backward product down to layer l, accumulating the bias
// aggregate along the way. On return `m` is C^(l) and `gamma` collects
// sum_j Chat^(j) beta^(j) for j in (l, L].
void backward_product(const MlpModel& model, const ForwardTrace& trace, std::size_t l,
                      Matrix& m, Vector& gamma) {
    const std::size_t L = model.num_layers();
    m = effective_final_weight(model, trace);
    gamma.assign(model.use_bias ? model.num_classes() : 0, 0.0);
    for (std::size_t j = L; j > l; --j) {
        Vector ratio = activation_ratio(trace.z[j - 1], model.activation);
        for (std::size_t c = 0; c < ratio.size(); ++c) m.scale_col(c, ratio[c]);  // Chat^(j)
        if (model.use_bias) {
            Vector contrib = m.matvec(model.biases[j - 1]);
            for (std::size_t k = 0; k < gamma.size(); ++k) gamma[k] += contrib[k];
        }
        m = m.matmul(model.weights[j - 1].transposed());  // C^(j-1)
    }
}

Matrix sign_matrix(const Matrix& c) {
    Matrix b(c.rows(), c.cols());
    for (std::size_t i = 0; i < c.data().size(); ++i)
        b.data()[i] = c.data()[i] > 0.0 ? 1.0 : -1.0;
    return b;
}

}  // namespace

HiddenClassifier coefficient_matrix(const MlpModel& model, const ForwardTrace& trace,
                                    std::size_t l) {
    check_trace(model, trace);
    const std::size_t L = model.num_layers();
    if (l > L) throw InvalidParameter("coefficient_matrix: layer index out of range");

    HiddenClassifier hc;
    hc.layer = l;
    backward_product(model, trace, l, hc.C, hc.gamma);
    hc.B = sign_matrix(hc.C);
    hc.basis_vec = (l == 0) ? trace.x : trace.a[l - 1];
    return hc;
}

HiddenClassifier pre_activation_classifier(const MlpModel& model, const ForwardTrace& trace,
                                           std::size_t l) {
    check_trace(model, trace);
    const std::size_t L = model.num_layers();
    if (l < 1 || l > L) throw InvalidParameter("pre_activation_classifier: layer index out of range");

    HiddenClassifier hc;
    hc.layer = l;
    hc.pre_activation = true;
    backward_product(model, trace, l, hc.C, hc.gamma);
    // Chat^(l) = C^(l) D^(l); psi = Chat z^(l) + gamma with the same gamma.
    Vector ratio = activation_ratio(trace.z[l - 1], model.activation);
    for (std::size_t c = 0; c < ratio.size(); ++c) hc.C.scale_col(c, ratio[c]);
    hc.B = sign_matrix(hc.C);
    hc.basis_vec = trace.z[l - 1];
    return hc;
}

Vector hidden_logits(const HiddenClassifier& hc, const ForwardTrace& trace) {
    const Vector& v = hc.pre_activation ? trace.z[hc.layer - 1]
                                        : (hc.layer == 0 ? trace.x : trace.a[hc.layer - 1]);
    if (v != hc.basis_vec)
        throw InvalidParameter("hidden_logits: trace does not match this classifier");
    return hc.B.matvec(v);
}

std::pair<double, double> approx_error(const ForwardTrace& trace, const HiddenClassifier& hc,
                                       std::size_t k) {
    const Vector& a = hc.basis_vec;
    (void)trace;
    double psi_bar = 0.0;
    Vector sa = sign_vec(a);
    double sign_diff_l1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        psi_bar += hc.B(k, i) * a[i];
        sign_diff_l1 += std::fabs(sa[i] - hc.B(k, i));
    }
    double err = lp_norm(a, 1.0) - psi_bar;
    double bound = lp_norm(a, kInfinityP) * sign_diff_l1;
    return {err, bound};
}

HiddenDiagnostics hidden_diagnostics(const MlpModel& model, const Dataset& dataset,
                                     std::size_t l) {
    if (!dataset.labeled()) throw InvalidParameter("hidden_diagnostics: dataset must be labeled");
    HiddenDiagnostics d;
    const std::size_t n = dataset.size();
    const std::size_t K = model.num_classes();
    for (std::size_t s = 0; s < n; ++s) {
        ForwardTrace t = forward(model, dataset.features[s]);
        HiddenClassifier hc = coefficient_matrix(model, t, l);
        Vector psi_bar = hidden_logits(hc, t);
        const std::size_t y = dataset.labels[s];

        std::size_t argmax = 0;
        for (std::size_t k = 1; k < K; ++k)
            if (psi_bar[k] > psi_bar[argmax]) argmax = k;
        if (argmax == y) d.hidden_accuracy += 1.0;

        Vector p = softmax(psi_bar);
        double h = 0.0;
        for (double pi : p)
            if (pi > 0.0) h -= pi * std::log(pi);
        d.mean_prediction_entropy += h;

        const Vector& a = hc.basis_vec;
        Vector sa = sign_vec(a);
        double sign_diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) sign_diff += std::fabs(sa[i] - hc.B(y, i));
        d.mean_sign_difference_target += sign_diff;

        const double denom = std::max(lp_norm(a, 1.0), 1e-12);
        d.mean_normalized_error_target += (lp_norm(a, 1.0) - psi_bar[y]) / denom;
        if (K > 1) {
            double nt = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                if (k != y) nt += (lp_norm(a, 1.0) - psi_bar[k]) / denom;
            d.mean_normalized_error_nontarget += nt / static_cast<double>(K - 1);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    d.hidden_accuracy *= inv_n;
    d.mean_prediction_entropy *= inv_n;
    d.mean_sign_difference_target *= inv_n;
    d.mean_normalized_error_target *= inv_n;
    d.mean_normalized_error_nontarget *= inv_n;
    return d;
}

void save_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("save_diagnostics_csv: cannot open " + path);
    f << "checkpoint_epoch,layer,hidden_accuracy,entropy,sign_diff,err_target,err_nontarget\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.checkpoint_epoch, r.layer, r.stats.hidden_accuracy,
                      r.stats.mean_prediction_entropy, r.stats.mean_sign_difference_target,
                      r.stats.mean_normalized_error_target,
                      r.stats.mean_normalized_error_nontarget);
        f << buf;
    }
}

}  // namespace nanlab
