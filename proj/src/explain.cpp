#include "csagc/explain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "csagc/dataset.hpp"
#include "csagc/errors.hpp"
#include "csagc/rng.hpp"

namespace csagc::explain {

using nlohmann::json;

std::vector<FeatureGroup> singleton_groups(int dim, const std::vector<std::string>& names) {
    std::vector<FeatureGroup> groups(dim);
    for (int i = 0; i < dim; ++i) {
        groups[i].name = i < static_cast<int>(names.size()) ? names[i]
                                                            : "f" + std::to_string(i);
        groups[i].columns = {i};
    }
    return groups;
}

std::vector<FeatureGroup> onehot_groups(const std::vector<std::string>& feature_names,
                                        const std::vector<double>& sample) {
    if (feature_names.size() != sample.size())
        throw ContractError("onehot_groups: name/sample length mismatch");
    std::vector<FeatureGroup> groups;
    std::size_t col = 0;
    for (int f = 0; f < dataset::kNumFeatures && col < feature_names.size(); ++f) {
        const std::string base = dataset::kFeatureNames[f];
        const bool categorical =
            std::find(dataset::kCategoricalFeatures.begin(), dataset::kCategoricalFeatures.end(),
                      f) != dataset::kCategoricalFeatures.end();
        if (!categorical) {
            if (feature_names[col] != base)
                throw ContractError("onehot_groups: unexpected column '" + feature_names[col] +
                                    "', wanted '" + base + "'");
            groups.push_back({base, {static_cast<int>(col)}});
            ++col;
            continue;
        }
        FeatureGroup g;
        std::string active;
        while (col < feature_names.size() &&
               feature_names[col].rfind(base + "_", 0) == 0) {
            if (sample[col] == 1.0) active = feature_names[col];
            g.columns.push_back(static_cast<int>(col));
            ++col;
        }
        if (g.columns.empty())
            throw ContractError("onehot_groups: no columns found for categorical '" + base + "'");
        g.name = active.empty() ? base + "_<unseen>" : active;
        groups.push_back(std::move(g));
    }
    return groups;
}

json ExplanationReport::to_json() const {
    json attrs = json::array();
    for (const auto& a : attributions)
        attrs.push_back({{"feature_name", a.feature_name},
                         {"value", a.value},
                         {"attribution", a.attribution}});
    return {{"sample_id", sample_id},
            {"method", method},
            {"base_value", base_value},
            {"model_output", model_output},
            {"attributions", attrs},
            {"predicted_class", predicted_class},
            {"predicted_prob", predicted_prob},
            {"notes", notes}};
}

namespace {

double group_value(const std::vector<double>& x, const FeatureGroup& g) {
    if (g.columns.size() == 1) return x[g.columns[0]];
    // one-hot block: report the active indicator's value (1 or 0 when unseen)
    double mx = 0.0;
    for (int c : g.columns) mx = std::max(mx, x[c]);
    return mx;
}

std::vector<double> compose(const std::vector<double>& x, const std::vector<double>& donor,
                            const std::vector<FeatureGroup>& groups,
                            const std::vector<char>& keep) {
    std::vector<double> out = donor;
    for (std::size_t g = 0; g < groups.size(); ++g)
        if (keep[g])
            for (int c : groups[g].columns) out[c] = x[c];
    return out;
}

}  // namespace

ExplanationReport lime_explain(const ModelFn& model, const std::vector<double>& x,
                               const std::vector<FeatureGroup>& groups,
                               const std::vector<double>& reference, const LimeConfig& cfg) {
    if (cfg.n_perturb < 100) throw ContractError("lime: n_perturb must be >= 100");
    if (reference.size() != x.size())
        throw ContractError("lime: reference length does not match sample");
    const int m = static_cast<int>(groups.size());
    const double kw = cfg.kernel_width > 0.0 ? cfg.kernel_width : 0.75 * std::sqrt(double(m));

    auto rng = make_rng(cfg.seed, "lime");
    std::bernoulli_distribution coin(0.5);

    std::vector<std::vector<char>> masks(cfg.n_perturb, std::vector<char>(m, 1));
    std::vector<std::vector<double>> rows(cfg.n_perturb);
    for (int i = 0; i < cfg.n_perturb; ++i) {
        if (i > 0)  // keep one unperturbed sample in the design
            for (int g = 0; g < m; ++g) masks[i][g] = coin(rng) ? 1 : 0;
        rows[i] = compose(x, reference, groups, masks[i]);
    }
    std::vector<double> y = model(rows);
    if (static_cast<int>(y.size()) != cfg.n_perturb)
        throw ContractError("lime: model returned wrong output count");

    Eigen::MatrixXd design(cfg.n_perturb, m + 1);
    Eigen::VectorXd target(cfg.n_perturb), weights(cfg.n_perturb);
    for (int i = 0; i < cfg.n_perturb; ++i) {
        design(i, 0) = 1.0;
        for (int g = 0; g < m; ++g) design(i, g + 1) = masks[i][g];
        target(i) = y[i];
        double d2 = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) {
            const double diff = rows[i][c] - x[c];
            d2 += diff * diff;
        }
        weights(i) = std::exp(-d2 / (kw * kw));
    }

    ExplanationReport rep;
    rep.method = "lime";
    rep.model_output = y[0];

    // ridge on the weighted normal equations; intercept unpenalized
    Eigen::MatrixXd wd = weights.asDiagonal() * design;
    Eigen::MatrixXd lhs = design.transpose() * wd;
    for (int g = 1; g <= m; ++g) lhs(g, g) += cfg.ridge_lambda;
    Eigen::VectorXd rhs = design.transpose() * (weights.asDiagonal() * target);
    Eigen::VectorXd beta = lhs.ldlt().solve(rhs);
    if (!beta.allFinite()) {
        // degenerate design: fall back on a stronger ridge
        for (int g = 1; g <= m; ++g) lhs(g, g) += 1.0;
        beta = lhs.ldlt().solve(rhs);
        rep.notes.push_back("degenerate design matrix; regularization increased");
    }
    rep.base_value = beta(0);

    std::vector<int> idx(m);
    for (int g = 0; g < m; ++g) idx[g] = g;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::fabs(beta(a + 1)) > std::fabs(beta(b + 1));
    });
    const int keep = std::min(cfg.n_features, m);
    for (int i = 0; i < keep; ++i) {
        const int g = idx[i];
        rep.attributions.push_back({groups[g].name, group_value(x, groups[g]), beta(g + 1)});
    }
    return rep;
}

namespace {

// v(S) = mean over background rows of f(x restricted to S, donor elsewhere)
double coalition_value(const ModelFn& model, const std::vector<double>& x,
                       const std::vector<FeatureGroup>& groups,
                       const std::vector<std::vector<double>>& background,
                       const std::vector<char>& keep) {
    std::vector<std::vector<double>> rows;
    rows.reserve(background.size());
    for (const auto& donor : background) rows.push_back(compose(x, donor, groups, keep));
    std::vector<double> out = model(rows);
    double s = 0.0;
    for (double v : out) s += v;
    return s / static_cast<double>(out.size());
}

}  // namespace

ExplanationReport kernel_shap(const ModelFn& model, const std::vector<double>& x,
                              const std::vector<FeatureGroup>& groups,
                              const std::vector<std::vector<double>>& background,
                              const ShapConfig& cfg) {
    if (background.empty()) throw ContractError("kernel_shap: background must be non-empty");
    const int m = static_cast<int>(groups.size());
    ExplanationReport rep;
    rep.method = "shap";

    std::vector<double> phi(m, 0.0);
    if (cfg.exact) {
        if (m > 12)
            throw ConfigError("kernel_shap: exact mode supports at most 12 groups, got " +
                              std::to_string(m));
        const int n_masks = 1 << m;
        std::vector<double> v(n_masks);
        for (int mask = 0; mask < n_masks; ++mask) {
            std::vector<char> keep(m, 0);
            for (int g = 0; g < m; ++g) keep[g] = (mask >> g) & 1;
            v[mask] = coalition_value(model, x, groups, background, keep);
        }
        rep.base_value = v[0];
        rep.model_output = v[n_masks - 1];
        std::vector<double> fact(m + 1, 1.0);
        for (int i = 1; i <= m; ++i) fact[i] = fact[i - 1] * i;
        for (int g = 0; g < m; ++g) {
            double total = 0.0;
            for (int mask = 0; mask < n_masks; ++mask) {
                if ((mask >> g) & 1) continue;
                const int s = __builtin_popcount(static_cast<unsigned>(mask));
                const double w = fact[s] * fact[m - s - 1] / fact[m];
                total += w * (v[mask | (1 << g)] - v[mask]);
            }
            phi[g] = total;
        }
    } else {
        if (cfg.n_samples < 2 * m + 2)
            throw ContractError("kernel_shap: sampled mode needs n_samples >= 2*groups + 2");
        rep.base_value =
            coalition_value(model, x, groups, background, std::vector<char>(m, 0));
        rep.model_output =
            coalition_value(model, x, groups, background, std::vector<char>(m, 1));
        const double delta = rep.model_output - rep.base_value;
        if (m == 1) {
            phi[0] = delta;
        } else {
            auto rng = make_rng(cfg.seed, "kernel-shap");
            // coalition sizes drawn from the Shapley kernel distribution
            std::vector<double> size_w(m - 1);
            for (int s = 1; s < m; ++s)
                size_w[s - 1] = double(m - 1) / (double(s) * double(m - s));
            std::discrete_distribution<int> size_dist(size_w.begin(), size_w.end());
            std::vector<int> perm(m);
            for (int g = 0; g < m; ++g) perm[g] = g;

            Eigen::MatrixXd design(cfg.n_samples, m - 1);
            Eigen::VectorXd target(cfg.n_samples);
            for (int i = 0; i < cfg.n_samples; ++i) {
                const int s = size_dist(rng) + 1;
                std::shuffle(perm.begin(), perm.end(), rng);
                std::vector<char> keep(m, 0);
                for (int j = 0; j < s; ++j) keep[perm[j]] = 1;
                const double vs = coalition_value(model, x, groups, background, keep);
                // efficiency constraint eliminates the last coefficient
                const double zm = keep[m - 1];
                for (int g = 0; g < m - 1; ++g) design(i, g) = double(keep[g]) - zm;
                target(i) = vs - rep.base_value - zm * delta;
            }
            Eigen::VectorXd sol = design.colPivHouseholderQr().solve(target);
            double partial = 0.0;
            for (int g = 0; g < m - 1; ++g) {
                phi[g] = sol(g);
                partial += sol(g);
            }
            phi[m - 1] = delta - partial;
        }
    }

    for (int g = 0; g < m; ++g)
        rep.attributions.push_back({groups[g].name, group_value(x, groups[g]), phi[g]});
    return rep;
}

json force_plot_data(const std::vector<ExplanationReport>& reports,
                     const std::string& stacking) {
    if (reports.empty()) throw ContractError("force_plot_data: no reports");
    if (stacking != "single" && stacking != "horizontal")
        throw ContractError("force_plot_data: stacking must be 'single' or 'horizontal'");
    std::vector<std::string> space;
    for (const auto& a : reports.front().attributions) space.push_back(a.feature_name);
    std::sort(space.begin(), space.end());
    for (const auto& r : reports) {
        std::vector<std::string> other;
        for (const auto& a : r.attributions) other.push_back(a.feature_name);
        std::sort(other.begin(), other.end());
        if (other != space)
            throw ContractError("force_plot_data: reports use mixed feature spaces");
    }
    json samples = json::array();
    for (const auto& r : reports) {
        std::vector<const Attribution*> pos, neg;
        for (const auto& a : r.attributions)
            (a.attribution >= 0.0 ? pos : neg).push_back(&a);
        auto by_mag = [](const Attribution* a, const Attribution* b) {
            return std::fabs(a->attribution) > std::fabs(b->attribution);
        };
        std::stable_sort(pos.begin(), pos.end(), by_mag);
        std::stable_sort(neg.begin(), neg.end(), by_mag);
        auto seg = [](const Attribution* a) {
            return json{{"feature", a->feature_name},
                        {"value", a->value},
                        {"attribution", a->attribution}};
        };
        json jp = json::array(), jn = json::array();
        for (auto* a : pos)
            if (a->attribution != 0.0) jp.push_back(seg(a));
        for (auto* a : neg) jn.push_back(seg(a));
        samples.push_back({{"sample_id", r.sample_id},
                           {"base_value", r.base_value},
                           {"output", r.model_output},
                           {"positive", jp},
                           {"negative", jn}});
    }
    return {{"kind", "force-plot"},
            {"stacking", stacking},
            {"base_value", reports.front().base_value},
            {"samples", samples}};
}

std::string force_plot_svg(const json& doc) {
    const auto& samples = doc.at("samples");
    std::ostringstream svg;
    const int width = 900;
    if (doc.at("stacking") == "single") {
        const auto& s = samples.at(0);
        const double base = s.at("base_value").get<double>();
        const double out = s.at("output").get<double>();
        double lo = std::min(base, out), hi = std::max(base, out);
        double span = std::max(hi - lo, 1e-9);
        lo -= 0.3 * span;
        hi += 0.3 * span;
        auto sx = [&](double v) { return (v - lo) / (hi - lo) * (width - 40) + 20; };
        svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
            << "' height='160'>\n";
        double cursor = base;
        int row = 0;
        for (const auto& seg : s.at("positive")) {
            const double a = seg.at("attribution").get<double>();
            svg << "<rect x='" << sx(cursor) << "' y='60' width='"
                << std::fabs(sx(cursor + a) - sx(cursor))
                << "' height='24' fill='#d62728' opacity='0.8'/>\n";
            svg << "<text x='" << sx(cursor) << "' y='" << 110 + 14 * (row % 3)
                << "' font-size='10'>" << seg.at("feature").get<std::string>() << "</text>\n";
            cursor += a;
            ++row;
        }
        for (const auto& seg : s.at("negative")) {
            const double a = seg.at("attribution").get<double>();
            svg << "<rect x='" << sx(cursor + a) << "' y='60' width='"
                << std::fabs(sx(cursor) - sx(cursor + a))
                << "' height='24' fill='#1f77b4' opacity='0.8'/>\n";
            svg << "<text x='" << sx(cursor + a) << "' y='" << 110 + 14 * (row % 3)
                << "' font-size='10'>" << seg.at("feature").get<std::string>() << "</text>\n";
            cursor += a;
            ++row;
        }
        svg << "<line x1='" << sx(base) << "' y1='40' x2='" << sx(base)
            << "' y2='95' stroke='black'/>\n";
        svg << "<text x='" << sx(base) << "' y='35' font-size='11'>base</text>\n";
        svg << "</svg>\n";
        return svg.str();
    }
    // horizontal stack: one column per sample, outputs as a polyline
    const int n = static_cast<int>(samples.size());
    double lo = 1e300, hi = -1e300;
    for (const auto& s : samples) {
        lo = std::min(lo, s.at("output").get<double>());
        hi = std::max(hi, s.at("output").get<double>());
        lo = std::min(lo, s.at("base_value").get<double>());
        hi = std::max(hi, s.at("base_value").get<double>());
    }
    double span = std::max(hi - lo, 1e-9);
    lo -= 0.1 * span;
    hi += 0.1 * span;
    const int height = 300;
    auto sx = [&](int i) { return 20.0 + (width - 40.0) * i / std::max(1, n - 1); };
    auto sy = [&](double v) { return height - 20 - (v - lo) / (hi - lo) * (height - 40); };
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n";
    for (int i = 0; i < n; ++i) {
        const auto& s = samples.at(i);
        double cursor = s.at("base_value").get<double>();
        for (const auto& seg : s.at("positive")) {
            const double a = seg.at("attribution").get<double>();
            svg << "<line x1='" << sx(i) << "' y1='" << sy(cursor) << "' x2='" << sx(i)
                << "' y2='" << sy(cursor + a) << "' stroke='#d62728' stroke-width='3'/>\n";
            cursor += a;
        }
        for (const auto& seg : s.at("negative")) {
            const double a = seg.at("attribution").get<double>();
            svg << "<line x1='" << sx(i) << "' y1='" << sy(cursor) << "' x2='" << sx(i)
                << "' y2='" << sy(cursor + a) << "' stroke='#1f77b4' stroke-width='3'/>\n";
            cursor += a;
        }
    }
    svg << "<polyline fill='none' stroke='black' stroke-width='1' points='";
    for (int i = 0; i < n; ++i)
        svg << sx(i) << "," << sy(samples.at(i).at("output").get<double>()) << " ";
    svg << "'/>\n</svg>\n";
    return svg.str();
}

}  // namespace csagc::explain
