#include "nanlab/net.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nanlab {

double gauss_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double gauss_pdf(double z) {
    static const double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double activate(double z, const ActivationKind& kind) {
    switch (kind.kind) {
        case Activation::ReLU:
            return z > 0.0 ? z : 0.0;
        case Activation::LeakyReLU:
            return z > 0.0 ? z : kind.slope * z;
        case Activation::GeLU:
            return z * gauss_cdf(z);
    }
    return 0.0;
}

double activate_derivative(double z, const ActivationKind& kind) {
    switch (kind.kind) {
        case Activation::ReLU:
            return z > 0.0 ? 1.0 : 0.0;
        case Activation::LeakyReLU:
            return z > 0.0 ? 1.0 : kind.slope;
        case Activation::GeLU:
            return gauss_cdf(z) + z * gauss_pdf(z);
    }
    return 0.0;
}

Vector activation_ratio(const Vector& z, const ActivationKind& kind) {
    Vector r(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] == 0.0) {
            r[i] = 0.0;  // convention sigma(0)/0 = 0
            continue;
        }
        switch (kind.kind) {
            case Activation::ReLU:
                r[i] = z[i] > 0.0 ? 1.0 : 0.0;
                break;
            case Activation::LeakyReLU:
                r[i] = z[i] > 0.0 ? 1.0 : kind.slope;
                break;
            case Activation::GeLU:
                r[i] = gauss_cdf(z[i]);
                break;
        }
    }
    return r;
}

MlpModel build_mlp(const std::vector<std::size_t>& layer_dims, ActivationKind activation,
                   bool use_bias, std::size_t num_classes, double temperature, Rng& rng,
                   std::size_t projection_dim) {
    if (layer_dims.size() < 2) throw InvalidParameter("build_mlp: need at least one hidden layer");
    for (std::size_t d : layer_dims)
        if (d < 1) throw InvalidParameter("build_mlp: all layer dims must be >= 1");
    if (num_classes < 1) throw InvalidParameter("build_mlp: num_classes must be >= 1");
    if (!(temperature > 0.0)) throw InvalidParameter("build_mlp: temperature must be positive");
    if (activation.kind == Activation::LeakyReLU &&
        !(activation.slope > 0.0 && activation.slope < 1.0))
        throw InvalidParameter("build_mlp: leaky slope must lie in (0,1)");

    MlpModel m;
    m.activation = activation;
    m.temperature = temperature;
    m.use_bias = use_bias;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t fan_in = layer_dims[l];
        const std::size_t fan_out = layer_dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Matrix w(fan_in, fan_out);
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(use_bias ? Vector(fan_out, 0.0) : Vector());
    }
    std::size_t emb = layer_dims.back();
    if (projection_dim > 0) {
        m.has_projection = true;
        const double bound = std::sqrt(6.0 / static_cast<double>(layer_dims.back()));
        m.projection = Matrix(layer_dims.back(), projection_dim);
        for (double& v : m.projection.data()) v = rng.uniform(-bound, bound);
        emb = projection_dim;
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        Vector p(emb);
        for (double& v : p) v = rng.normal();
        double n = lp_norm(p, 2.0);
        if (n > 0.0)
            for (double& v : p) v /= n;
        m.prototypes.push_back(std::move(p));
    }
    return m;
}

ForwardTrace forward(const MlpModel& model, const Vector& x) {
    if (x.size() != model.input_dim()) throw InvalidParameter("forward: input dimension mismatch");
    ForwardTrace t;
    t.x = x;
    const Vector* prev = &t.x;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        Vector z = model.weights[l].tmatvec(*prev);
        if (model.use_bias)
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += model.biases[l][i];
        Vector a(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) a[i] = activate(z[i], model.activation);
        t.z.push_back(std::move(z));
        t.a.push_back(std::move(a));
        prev = &t.a.back();
    }
    t.g = model.has_projection ? model.projection.tmatvec(t.a.back()) : t.a.back();
    const double gn = lp_norm(t.g, 2.0);
    t.logits.assign(model.num_classes(), 0.0);
    if (gn > 0.0) {
        for (std::size_t k = 0; k < model.num_classes(); ++k) {
            const double wn = lp_norm(model.prototypes[k], 2.0);
            t.logits[k] = dot(model.prototypes[k], t.g) / (model.temperature * wn * gn);
        }
    }
    return t;
}

Gradients backward(const MlpModel& model, const std::vector<Vector>& inputs,
                   const std::vector<std::size_t>& labels) {
    if (inputs.empty() || inputs.size() != labels.size())
        throw InvalidParameter("backward: batch empty or sizes mismatch");
    const std::size_t K = model.num_classes();
    for (std::size_t y : labels)
        if (y >= K) throw InvalidParameter("backward: label out of range");

    Gradients g;
    for (const auto& w : model.weights) g.weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : model.biases) g.biases.emplace_back(b.size(), 0.0);
    if (model.has_projection)
        g.projection = Matrix(model.projection.rows(), model.projection.cols());
    for (const auto& p : model.prototypes) g.prototypes.emplace_back(p.size(), 0.0);

    const double inv_b = 1.0 / static_cast<double>(inputs.size());
    const double T = model.temperature;

    for (std::size_t s = 0; s < inputs.size(); ++s) {
        ForwardTrace t = forward(model, inputs[s]);
        Vector p = softmax(t.logits);
        const std::size_t y = labels[s];
        g.loss += -std::log(std::max(p[y], 1e-300)) * inv_b;
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < K; ++k)
            if (t.logits[k] > t.logits[argmax]) argmax = k;
        if (argmax == y) ++g.correct;

        Vector dphi = p;
        dphi[y] -= 1.0;
        for (double& v : dphi) v *= inv_b;

        const double gn = lp_norm(t.g, 2.0);
        Vector dg(t.g.size(), 0.0);
        if (gn > 0.0) {
            Vector ghat(t.g.size());
            for (std::size_t i = 0; i < t.g.size(); ++i) ghat[i] = t.g[i] / gn;
            Vector dghat(t.g.size(), 0.0);
            for (std::size_t k = 0; k < K; ++k) {
                const Vector& w = model.prototypes[k];
                const double wn = lp_norm(w, 2.0);
                const double cos_k = dot(w, ghat) / wn;
                // through the prototype normalization
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const double phat = w[i] / wn;
                    g.prototypes[k][i] += dphi[k] * (ghat[i] - cos_k * phat) / (wn * T);
                    dghat[i] += dphi[k] * phat / T;
                }
            }
            const double radial = dot(dghat, ghat);
            for (std::size_t i = 0; i < t.g.size(); ++i)
                dg[i] = (dghat[i] - radial * ghat[i]) / gn;
        }

        Vector da;
        if (model.has_projection) {
            const Vector& aL = t.a.back();
            for (std::size_t i = 0; i < aL.size(); ++i)
                for (std::size_t j = 0; j < dg.size(); ++j) g.projection(i, j) += aL[i] * dg[j];
            da = model.projection.matvec(dg);
        } else {
            da = dg;
        }

        for (std::size_t l = model.num_layers(); l-- > 0;) {
            Vector dz(da.size());
            for (std::size_t i = 0; i < da.size(); ++i)
                dz[i] = da[i] * activate_derivative(t.z[l][i], model.activation);
            const Vector& prev = (l == 0) ? t.x : t.a[l - 1];
            Matrix& gw = g.weights[l];
            for (std::size_t i = 0; i < prev.size(); ++i) {
                const double pi = prev[i];
                if (pi == 0.0) continue;
                for (std::size_t j = 0; j < dz.size(); ++j) gw(i, j) += pi * dz[j];
            }
            if (model.use_bias)
                for (std::size_t j = 0; j < dz.size(); ++j) g.biases[l][j] += dz[j];
            if (l > 0) da = model.weights[l].matvec(dz);
        }
    }
    if (!std::isfinite(g.loss)) throw NumericalFailure("backward: non-finite loss");
    return g;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_array(std::string& out, const std::vector<double>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        append_double(out, v[i]);
    }
    out += ']';
}

const char* activation_name(const ActivationKind& a) {
    switch (a.kind) {
        case Activation::ReLU:
            return "relu";
        case Activation::LeakyReLU:
            return "leaky_relu";
        case Activation::GeLU:
            return "gelu";
    }
    return "relu";
}

}  // namespace

std::string serialize_model(const MlpModel& model) {
    // Written by hand so that doubles carry 17 significant digits and the key
    // order is fixed, making the file deterministic and bit-exact on reload.
    std::string s = "{\n  \"dims\": [";
    s += std::to_string(model.input_dim());
    for (std::size_t l = 0; l < model.num_layers(); ++l)
        s += "," + std::to_string(model.hidden_dim(l));
    s += "],\n  \"activation\": \"";
    s += activation_name(model.activation);
    s += "\",\n  \"leaky_slope\": ";
    append_double(s, model.activation.slope);
    s += ",\n  \"use_bias\": ";
    s += model.use_bias ? "true" : "false";
    s += ",\n  \"temperature\": ";
    append_double(s, model.temperature);
    s += ",\n  \"projection_dim\": ";
    s += std::to_string(model.has_projection ? model.projection.cols() : 0);
    s += ",\n  \"weights\": [\n";
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        s += "    ";
        append_array(s, model.weights[l].data());
        s += (l + 1 < model.num_layers()) ? ",\n" : "\n";
    }
    s += "  ],\n  \"biases\": [\n";
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        s += "    ";
        append_array(s, model.biases[l]);
        s += (l + 1 < model.num_layers()) ? ",\n" : "\n";
    }
    s += "  ],\n  \"projection\": ";
    if (model.has_projection)
        append_array(s, model.projection.data());
    else
        s += "[]";
    s += ",\n  \"prototypes\": [\n";
    for (std::size_t k = 0; k < model.prototypes.size(); ++k) {
        s += "    ";
        append_array(s, model.prototypes[k]);
        s += (k + 1 < model.prototypes.size()) ? ",\n" : "\n";
    }
    s += "  ]\n}\n";
    return s;
}

MlpModel deserialize_model(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    MlpModel m;
    try {
        std::vector<std::size_t> dims = j.at("dims").get<std::vector<std::size_t>>();
        std::string act = j.at("activation").get<std::string>();
        if (act == "relu")
            m.activation = ActivationKind::relu();
        else if (act == "leaky_relu")
            m.activation = ActivationKind::leaky(j.at("leaky_slope").get<double>());
        else if (act == "gelu")
            m.activation = ActivationKind::gelu();
        else
            throw ParseError("model JSON: unknown activation '" + act + "'");
        m.use_bias = j.at("use_bias").get<bool>();
        m.temperature = j.at("temperature").get<double>();
        const auto& jw = j.at("weights");
        const auto& jb = j.at("biases");
        if (jw.size() + 1 != dims.size() || jb.size() != jw.size())
            throw ParseError("model JSON: layer count mismatch");
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            Matrix w(dims[l], dims[l + 1]);
            std::vector<double> flat = jw[l].get<std::vector<double>>();
            if (flat.size() != dims[l] * dims[l + 1])
                throw ParseError("model JSON: weight size mismatch at layer " + std::to_string(l));
            w.data() = std::move(flat);
            m.weights.push_back(std::move(w));
            m.biases.push_back(jb[l].get<std::vector<double>>());
        }
        std::size_t pdim = j.at("projection_dim").get<std::size_t>();
        if (pdim > 0) {
            m.has_projection = true;
            m.projection = Matrix(dims.back(), pdim);
            std::vector<double> flat = j.at("projection").get<std::vector<double>>();
            if (flat.size() != dims.back() * pdim)
                throw ParseError("model JSON: projection size mismatch");
            m.projection.data() = std::move(flat);
        }
        for (const auto& p : j.at("prototypes")) m.prototypes.push_back(p.get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    if (m.prototypes.empty()) throw ParseError("model JSON: no prototypes");
    return m;
}

void save_model(const MlpModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("save_model: cannot open " + path);
    f << serialize_model(model);
}

MlpModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("load_model: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_model(ss.str());
}

}  // namespace nanlab
