#pragma once

#include <string>
#include <vector>

#include "nanlab/matrix.hpp"
#include "nanlab/numcore.hpp"
#include "nanlab/rng.hpp"

namespace nanlab {

enum class Activation { ReLU, LeakyReLU, GeLU };

struct ActivationKind {
    Activation kind = Activation::ReLU;
    double slope = 0.01;  // LeakyReLU only, must lie in (0,1)

    static ActivationKind relu() { return {Activation::ReLU, 0.0}; }
    static ActivationKind leaky(double s) { return {Activation::LeakyReLU, s}; }
    static ActivationKind gelu() { return {Activation::GeLU, 0.0}; }
};

// Standard normal CDF / PDF, used by the exact GeLU.
double gauss_cdf(double z);
double gauss_pdf(double z);

double activate(double z, const ActivationKind& kind);
double activate_derivative(double z, const ActivationKind& kind);

// Entrywise sigma(z_i)/z_i with the convention ratio(0) = 0. For ReLU this is
// the 0/1 on-indicator, for LeakyReLU {slope, 1}, for GeLU the exact Phi(z).
Vector activation_ratio(const Vector& z, const ActivationKind& kind);

// Rectifier MLP with scaled cosine-similarity logits:
//   psi_k = (1/T) (w_k . g) / (|w_k| |g|),  g = U^T a^(L).
// U defaults to identity (has_projection = false) and is then not stored.
struct MlpModel {
    std::vector<Matrix> weights;   // W^(l): d_{l-1} x d_l, z = W^T a + beta
    std::vector<Vector> biases;    // empty vectors when use_bias is false
    bool use_bias = false;
    bool has_projection = false;
    Matrix projection;             // U: d_L x emb, only when has_projection
    std::vector<Vector> prototypes;  // w_k, dim = embedding width
    double temperature = 0.1;
    ActivationKind activation;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return weights.front().rows(); }
    std::size_t hidden_dim(std::size_t l) const { return weights[l].cols(); }  // l in [0,L)
    std::size_t last_hidden_dim() const { return weights.back().cols(); }
    std::size_t embedding_dim() const {
        return has_projection ? projection.cols() : last_hidden_dim();
    }
    std::size_t num_classes() const { return prototypes.size(); }
};

struct ForwardTrace {
    Vector x;
    std::vector<Vector> z;  // pre-activations, layer 1..L
    std::vector<Vector> a;  // post-activations, layer 1..L
    Vector g;               // embedding
    Vector logits;

    const Vector& last_hidden() const { return a.back(); }
};

MlpModel build_mlp(const std::vector<std::size_t>& layer_dims, ActivationKind activation,
                   bool use_bias, std::size_t num_classes, double temperature, Rng& rng,
                   std::size_t projection_dim = 0);

ForwardTrace forward(const MlpModel& model, const Vector& x);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix projection;
    std::vector<Vector> prototypes;
    double loss = 0.0;
    std::size_t correct = 0;
};

// Mean cross-entropy over the cosine logits plus exact analytic gradients for
// every parameter, including the cosine normalization path.
Gradients backward(const MlpModel& model, const std::vector<Vector>& inputs,
                   const std::vector<std::size_t>& labels);

std::string serialize_model(const MlpModel& model);
MlpModel deserialize_model(const std::string& json_text);

void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace nanlab
