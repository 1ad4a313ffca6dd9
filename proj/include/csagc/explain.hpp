#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace csagc::explain {

// Black-box model view: batch of feature vectors -> one scalar per row
// (typically the probability of the explained class).
using ModelFn = std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

// Attribution unit. Numeric features are singleton groups; one-hot blocks are
// grouped so a categorical feature is always toggled atomically.
struct FeatureGroup {
    std::string name;
    std::vector<int> columns;
};

std::vector<FeatureGroup> singleton_groups(int dim,
                                           const std::vector<std::string>& names = {});

// Groups encoded columns by their source feature (one group per one-hot
// block, named after the sample's active indicator, e.g. service_http).
std::vector<FeatureGroup> onehot_groups(const std::vector<std::string>& feature_names,
                                        const std::vector<double>& sample);

struct Attribution {
    std::string feature_name;
    double value = 0.0;        // the sample's value for this group
    double attribution = 0.0;
};

struct ExplanationReport {
    std::string sample_id;
    std::string method;  // "lime" | "shap"
    double base_value = 0.0;
    double model_output = 0.0;
    std::vector<Attribution> attributions;
    int predicted_class = -1;
    double predicted_prob = 0.0;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

struct LimeConfig {
    int n_perturb = 5000;
    double kernel_width = -1.0;  // <=0: 0.75 * sqrt(#groups)
    double ridge_lambda = 1e-3;
    int n_features = 10;         // top coefficients kept in the report
    std::uint64_t seed = 0;
};

// Local ridge surrogate over group-masking perturbations; masked groups are
// replaced from `reference` (background means / reference category).
ExplanationReport lime_explain(const ModelFn& model, const std::vector<double>& x,
                               const std::vector<FeatureGroup>& groups,
                               const std::vector<double>& reference, const LimeConfig& cfg);

struct ShapConfig {
    int n_samples = 0;     // sampled mode; must be >= 2*groups + 2
    bool exact = true;     // exact enumeration, groups <= 12
    std::uint64_t seed = 0;
};

// Kernel SHAP; masked groups are imputed from background rows. Exact mode
// enumerates all coalitions and satisfies the Shapley axioms to solver
// precision; sampled mode solves the efficiency-constrained weighted
// least-squares system.
ExplanationReport kernel_shap(const ModelFn& model, const std::vector<double>& x,
                              const std::vector<FeatureGroup>& groups,
                              const std::vector<std::vector<double>>& background,
                              const ShapConfig& cfg);

// Force-plot document: base value plus ordered signed segments per sample;
// "horizontal" stacks many reports for the 100-sample style rendering.
nlohmann::json force_plot_data(const std::vector<ExplanationReport>& reports,
                               const std::string& stacking);

std::string force_plot_svg(const nlohmann::json& plot_doc);

}  // namespace csagc::explain
