#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace csagc::metrics {

struct PerClass {
    long support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    int num_classes = 0;
    std::vector<long> confusion;  // row = true class, col = predicted, row-major
    double accuracy = 0.0;
    std::vector<PerClass> per_class;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;

    long at(int true_c, int pred_c) const { return confusion[true_c * num_classes + pred_c]; }
    nlohmann::json to_json() const;
    // Acc/Pre/Recall/F1 in percent, two decimals
    std::string format_table(const std::string& row_label) const;
};

double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred);

// Per-class one-vs-rest precision/recall/F1 with support-weighted aggregates.
// Zero-denominator convention: the metric is 0.
EvalReport weighted_prf(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                        int num_classes);

// Model complexity. Multiply-accumulate counts as 2 FLOPs; maxpool and
// activations count 0. Per-layer formulas are documented in the README.
struct LayerCost {
    std::string name;
    long params = 0;
    long flops = 0;
};

struct ComplexityReport {
    std::vector<LayerCost> layers;
    long params() const;
    long flops() const;
    nlohmann::json to_json() const;
};

}  // namespace csagc::metrics
