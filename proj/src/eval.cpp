#include "nanlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace nanlab {

namespace {

// Average ranks (1-based) with ties sharing the mean rank.
Vector average_ranks(const Vector& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    Vector ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double auroc(const Vector& id_scores, const Vector& ood_scores) {
    if (id_scores.empty() || ood_scores.empty())
        throw InvalidParameter("auroc: empty score set");
    Vector all = id_scores;
    all.insert(all.end(), ood_scores.begin(), ood_scores.end());
    Vector ranks = average_ranks(all);
    const double n = static_cast<double>(id_scores.size());
    const double m = static_cast<double>(ood_scores.size());
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < id_scores.size(); ++i) rank_sum += ranks[i];
    return (rank_sum - n * (n + 1.0) / 2.0) / (n * m);
}

double fpr95(const Vector& id_scores, const Vector& ood_scores) {
    if (id_scores.empty() || ood_scores.empty())
        throw InvalidParameter("fpr95: empty score set");
    Vector sorted = id_scores;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    const std::size_t n = sorted.size();
    const std::size_t need =
        static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    const double tau = sorted[need - 1];
    std::size_t fp = 0;
    for (double s : ood_scores)
        if (s >= tau) ++fp;
    return static_cast<double>(fp) / static_cast<double>(ood_scores.size());
}

ActivationEntropy activation_entropy(const std::vector<Vector>& activations) {
    if (activations.empty()) throw InvalidParameter("activation_entropy: no samples");
    const std::size_t d = activations[0].size();
    ActivationEntropy out;
    out.per_unit.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        std::size_t on = 0;
        for (const auto& a : activations)
            if (a[i] > 0.0) ++on;
        const double p = static_cast<double>(on) / static_cast<double>(activations.size());
        double h = 0.0;
        if (p > 0.0 && p < 1.0) h = -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
        out.per_unit[i] = h;
        out.mean += h;
    }
    out.mean /= static_cast<double>(d);
    return out;
}

double mean_sparsity(const std::vector<Vector>& activations, double inactive_cap) {
    if (activations.empty()) throw InvalidParameter("mean_sparsity: no samples");
    double s = 0.0;
    for (const auto& a : activations) {
        const std::size_t act = active_count(a);
        s += act == 0 ? inactive_cap : 1.0 / static_cast<double>(act);
    }
    return s / static_cast<double>(activations.size());
}

double spearman(const Vector& x, const Vector& y) {
    if (x.size() != y.size()) throw InvalidParameter("spearman: length mismatch");
    if (x.size() < 3) throw InvalidParameter("spearman: need at least 3 points");
    Vector rx = average_ranks(x);
    Vector ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

EvalReport build_report(const MlpModel& model, const Dataset& id_train, const Dataset& id_test,
                        const std::vector<Dataset>& ood_sets,
                        const std::vector<ScoreKind>& score_kinds, const BankIndex& bank,
                        std::size_t threads) {
    EvalReport rep;
    std::vector<Vector> test_acts;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < id_test.size(); ++i) {
        ForwardTrace t = forward(model, id_test.features[i]);
        test_acts.push_back(t.a.back());
        if (id_test.labeled()) {
            std::size_t argmax = 0;
            for (std::size_t k = 1; k < t.logits.size(); ++k)
                if (t.logits[k] > t.logits[argmax]) argmax = k;
            if (argmax == id_test.labels[i]) ++correct;
        }
    }
    if (id_test.labeled())
        rep.id_accuracy = static_cast<double>(correct) / static_cast<double>(id_test.size());
    rep.mean_activation_entropy = activation_entropy(test_acts).mean;
    rep.mean_sparsity_value = mean_sparsity(test_acts);

    for (const auto& kind : score_kinds) {
        const BankIndex* b = &bank;
        Vector s_test = score_dataset(model, id_test, kind, b, threads);
        Vector s_train = score_dataset(model, id_train, kind, b, threads);
        for (const auto& ood : ood_sets) {
            Vector s_ood = score_dataset(model, ood, kind, b, threads);
            ScoreCell cell;
            cell.score_name = kind.label();
            cell.ood_set = ood.name;
            cell.auroc = auroc(s_test, s_ood);
            cell.fpr95 = fpr95(s_test, s_ood);
            cell.train_auroc = auroc(s_train, s_ood);
            rep.scores.push_back(std::move(cell));
        }
    }
    return rep;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["run_id"] = report.run_id;
    j["seed"] = report.seed;
    j["config_digest"] = report.config_digest;
    j["scores"] = nlohmann::ordered_json::array();
    for (const auto& c : report.scores) {
        nlohmann::ordered_json cell;
        cell["name"] = c.score_name;
        cell["ood_set"] = c.ood_set;
        cell["auroc"] = c.auroc;
        cell["fpr95"] = c.fpr95;
        cell["train_auroc"] = c.train_auroc;
        j["scores"].push_back(std::move(cell));
    }
    j["diagnostics"] = {{"id_accuracy", report.id_accuracy},
                        {"mean_activation_entropy", report.mean_activation_entropy},
                        {"mean_sparsity", report.mean_sparsity_value}};
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
    EvalReport rep;
    try {
        rep.run_id = j.at("run_id").get<std::string>();
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.config_digest = j.at("config_digest").get<std::string>();
        for (const auto& c : j.at("scores")) {
            ScoreCell cell;
            cell.score_name = c.at("name").get<std::string>();
            cell.ood_set = c.at("ood_set").get<std::string>();
            cell.auroc = c.at("auroc").get<double>();
            cell.fpr95 = c.at("fpr95").get<double>();
            cell.train_auroc = c.at("train_auroc").get<double>();
            rep.scores.push_back(std::move(cell));
        }
        const auto& d = j.at("diagnostics");
        rep.id_accuracy = d.at("id_accuracy").get<double>();
        rep.mean_activation_entropy = d.at("mean_activation_entropy").get<double>();
        rep.mean_sparsity_value = d.at("mean_sparsity").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
    return rep;
}

}  // namespace nanlab
