#include "nanlab/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace nanlab {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + section + it.key() + "'");
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).template get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (data.generator != "blobs" && data.generator != "blobs_unlabeled" &&
        data.generator != "csv")
        throw ConfigError("data.generator: unknown generator '" + data.generator + "'");
    if (data.generator == "csv" && data.csv_train.empty())
        throw ConfigError("data.csv_train: required for the csv generator");
    if (model.hidden_dims.empty()) throw ConfigError("model.hidden_dims: must be non-empty");
    for (std::size_t d : model.hidden_dims)
        if (d < 1) throw ConfigError("model.hidden_dims: entries must be >= 1");
    if (!(model.temperature > 0.0)) throw ConfigError("model.temperature: must be positive");
    if (model.activation.kind == Activation::LeakyReLU &&
        !(model.activation.slope > 0.0 && model.activation.slope < 1.0))
        throw ConfigError("model.leaky_slope: must lie in (0,1)");
    try {
        train.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    if (train.scheme == LabelScheme::S && data.generator == "blobs_unlabeled")
        throw ConfigError(
            "train.scheme: scheme S needs ground-truth labels but data.generator "
            "'blobs_unlabeled' provides none");
    for (const auto& o : ood_sets) {
        if (o.n < 1) throw ConfigError("ood.n: must be >= 1");
        if (o.kind == OodKind::Interpolated && data.generator == "blobs_unlabeled")
            throw ConfigError(
                "ood.kind: 'interpolated' needs a labeled reference but data.generator "
                "'blobs_unlabeled' provides none");
    }
    if (score_kinds.empty()) throw ConfigError("scores: must list at least one kind");
    if (eval.react_percentile < 0.0 || eval.react_percentile > 100.0)
        throw ConfigError("eval.react_percentile: outside [0,100]");
    if (eval.ssd_clusters < 1) throw ConfigError("eval.ssd_clusters: must be >= 1");
    if (eval.knn_k < 1) throw ConfigError("eval.knn_k: must be >= 1");
    if (eval.gaussian_shrinkage < 0.0 || eval.gaussian_shrinkage > 1.0)
        throw ConfigError("eval.gaussian_shrinkage: outside [0,1]");
    if (output_dir.empty()) throw ConfigError("output.dir: must be non-empty");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    ExperimentConfig c;
    try {
        reject_unknown(j, {"seed", "data", "ood", "model", "train", "scores", "eval", "output"},
                       "");
        read_if(j, "seed", c.seed);
        if (j.contains("data")) {
            const json& d = j.at("data");
            reject_unknown(d,
                           {"generator", "classes", "dim", "n_per_class", "spread", "separation",
                            "normalize", "csv_train", "csv_test"},
                           "data.");
            read_if(d, "generator", c.data.generator);
            read_if(d, "classes", c.data.blobs.classes);
            read_if(d, "dim", c.data.blobs.dim);
            read_if(d, "n_per_class", c.data.blobs.n_per_class);
            read_if(d, "spread", c.data.blobs.spread);
            read_if(d, "separation", c.data.blobs.separation);
            read_if(d, "normalize", c.data.normalize);
            read_if(d, "csv_train", c.data.csv_train);
            read_if(d, "csv_test", c.data.csv_test);
        }
        if (j.contains("ood")) {
            for (const auto& o : j.at("ood")) {
                reject_unknown(o, {"kind", "n", "scale"}, "ood.");
                OodParams p;
                p.kind = ood_kind_from_string(o.at("kind").get<std::string>());
                read_if(o, "n", p.n);
                read_if(o, "scale", p.scale);
                c.ood_sets.push_back(p);
            }
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            reject_unknown(m,
                           {"hidden_dims", "activation", "leaky_slope", "use_bias", "temperature",
                            "projection_dim"},
                           "model.");
            read_if(m, "hidden_dims", c.model.hidden_dims);
            if (m.contains("activation")) {
                std::string a = m.at("activation").get<std::string>();
                if (a == "relu")
                    c.model.activation = ActivationKind::relu();
                else if (a == "leaky_relu")
                    c.model.activation = ActivationKind::leaky(
                        m.contains("leaky_slope") ? m.at("leaky_slope").get<double>() : 0.01);
                else if (a == "gelu")
                    c.model.activation = ActivationKind::gelu();
                else
                    throw ConfigError("model.activation: unknown activation '" + a + "'");
            }
            read_if(m, "use_bias", c.model.use_bias);
            read_if(m, "temperature", c.model.temperature);
            read_if(m, "projection_dim", c.model.projection_dim);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            reject_unknown(t,
                           {"scheme", "epochs", "batch_size", "lr0", "momentum", "weight_decay",
                            "augment_noise_sigma", "augment_drop_prob", "checkpoint_stride",
                            "instance_cap"},
                           "train.");
            if (t.contains("scheme"))
                c.train.scheme = scheme_from_string(t.at("scheme").get<std::string>());
            read_if(t, "epochs", c.train.epochs);
            read_if(t, "batch_size", c.train.batch_size);
            read_if(t, "lr0", c.train.lr0);
            read_if(t, "momentum", c.train.momentum);
            read_if(t, "weight_decay", c.train.weight_decay);
            read_if(t, "augment_noise_sigma", c.train.augment_noise_sigma);
            read_if(t, "augment_drop_prob", c.train.augment_drop_prob);
            read_if(t, "checkpoint_stride", c.train.checkpoint_stride);
            read_if(t, "instance_cap", c.train.instance_cap);
        }
        if (j.contains("scores")) {
            for (const auto& s : j.at("scores")) {
                if (s.is_string()) {
                    c.score_kinds.push_back(score_kind_from_string(s.get<std::string>()));
                } else {
                    reject_unknown(s, {"kind", "k", "p", "react"}, "scores.");
                    ScoreKind k = score_kind_from_string(s.at("kind").get<std::string>());
                    read_if(s, "k", k.k);
                    read_if(s, "p", k.p);
                    read_if(s, "react", k.react);
                    c.score_kinds.push_back(k);
                }
            }
        }
        if (j.contains("eval")) {
            const json& e = j.at("eval");
            reject_unknown(e,
                           {"react_percentile", "ssd_clusters", "residual_dim", "knn_k",
                            "gaussian_shrinkage"},
                           "eval.");
            read_if(e, "react_percentile", c.eval.react_percentile);
            read_if(e, "ssd_clusters", c.eval.ssd_clusters);
            read_if(e, "residual_dim", c.eval.residual_dim);
            read_if(e, "knn_k", c.eval.knn_k);
            read_if(e, "gaussian_shrinkage", c.eval.gaussian_shrinkage);
        }
        if (j.contains("output")) {
            const json& o = j.at("output");
            reject_unknown(o, {"dir"}, "output.");
            read_if(o, "dir", c.output_dir);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.train.seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_experiment_config(ss.str());
}

std::string canonical_config(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["data"] = {{"generator", c.data.generator},
                 {"classes", c.data.blobs.classes},
                 {"dim", c.data.blobs.dim},
                 {"n_per_class", c.data.blobs.n_per_class},
                 {"spread", c.data.blobs.spread},
                 {"separation", c.data.blobs.separation},
                 {"normalize", c.data.normalize},
                 {"csv_train", c.data.csv_train},
                 {"csv_test", c.data.csv_test}};
    j["ood"] = nlohmann::ordered_json::array();
    for (const auto& o : c.ood_sets)
        j["ood"].push_back(
            {{"kind", ood_kind_name(o.kind)}, {"n", o.n}, {"scale", o.scale}});
    std::string act = c.model.activation.kind == Activation::ReLU        ? "relu"
                      : c.model.activation.kind == Activation::LeakyReLU ? "leaky_relu"
                                                                         : "gelu";
    j["model"] = {{"hidden_dims", c.model.hidden_dims},
                  {"activation", act},
                  {"leaky_slope", c.model.activation.slope},
                  {"use_bias", c.model.use_bias},
                  {"temperature", c.model.temperature},
                  {"projection_dim", c.model.projection_dim}};
    j["train"] = {{"scheme", scheme_name(c.train.scheme)},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"lr0", c.train.lr0},
                  {"momentum", c.train.momentum},
                  {"weight_decay", c.train.weight_decay},
                  {"augment_noise_sigma", c.train.augment_noise_sigma},
                  {"augment_drop_prob", c.train.augment_drop_prob},
                  {"checkpoint_stride", c.train.checkpoint_stride},
                  {"instance_cap", c.train.instance_cap}};
    j["scores"] = nlohmann::ordered_json::array();
    for (const auto& k : c.score_kinds)
        j["scores"].push_back({{"kind", k.label()}, {"k", k.k}, {"p", k.p}, {"react", k.react}});
    j["eval"] = {{"react_percentile", c.eval.react_percentile},
                 {"ssd_clusters", c.eval.ssd_clusters},
                 {"residual_dim", c.eval.residual_dim},
                 {"knn_k", c.eval.knn_k},
                 {"gaussian_shrinkage", c.eval.gaussian_shrinkage}};
    j["output"] = {{"dir", c.output_dir}};
    return j.dump(2) + "\n";
}

std::string config_digest(const ExperimentConfig& config) {
    const std::string canon = canonical_config(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace nanlab
