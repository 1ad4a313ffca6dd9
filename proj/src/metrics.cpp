#include "csagc/metrics.hpp"

#include <cstdio>

#include "csagc/errors.hpp"

namespace csagc::metrics {

using nlohmann::json;

double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.empty()) throw ContractError("accuracy: empty input");
    if (y_true.size() != y_pred.size())
        throw ContractError("accuracy: length mismatch " + std::to_string(y_true.size()) +
                            " vs " + std::to_string(y_pred.size()));
    long hits = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        if (y_true[i] == y_pred[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

EvalReport weighted_prf(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                        int num_classes) {
    if (y_true.empty()) throw ContractError("weighted_prf: empty input");
    if (y_true.size() != y_pred.size()) throw ContractError("weighted_prf: length mismatch");
    EvalReport rep;
    rep.num_classes = num_classes;
    rep.confusion.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
            throw ContractError("weighted_prf: label out of range at sample " +
                                std::to_string(i));
        rep.confusion[static_cast<std::size_t>(t) * num_classes + p] += 1;
    }
    rep.accuracy = accuracy(y_true, y_pred);
    rep.per_class.resize(num_classes);
    const double n = static_cast<double>(y_true.size());
    for (int c = 0; c < num_classes; ++c) {
        long tp = rep.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < num_classes; ++o) {
            if (o == c) continue;
            fp += rep.at(o, c);
            fn += rep.at(c, o);
        }
        PerClass& pc = rep.per_class[c];
        pc.support = tp + fn;
        pc.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        pc.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        pc.f1 = (pc.precision + pc.recall) > 0.0
                    ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                    : 0.0;
        const double w = pc.support / n;
        rep.weighted_precision += w * pc.precision;
        rep.weighted_recall += w * pc.recall;
        rep.weighted_f1 += w * pc.f1;
    }
    return rep;
}

json EvalReport::to_json() const {
    json per = json::array();
    for (const auto& pc : per_class)
        per.push_back({{"support", pc.support},
                       {"precision", pc.precision},
                       {"recall", pc.recall},
                       {"f1", pc.f1}});
    return {{"num_classes", num_classes},
            {"confusion", confusion},
            {"accuracy", accuracy},
            {"per_class", per},
            {"weighted_precision", weighted_precision},
            {"weighted_recall", weighted_recall},
            {"weighted_f1", weighted_f1},
            {"zero_division_convention", "metric is 0 when its denominator is 0"}};
}

std::string EvalReport::format_table(const std::string& row_label) const {
    char buf[256];
    std::string out = "Model                Acc    Pre    Recall F1\n";
    std::snprintf(buf, sizeof(buf), "%-20s %-6.2f %-6.2f %-6.2f %-6.2f\n", row_label.c_str(),
                  accuracy * 100.0, weighted_precision * 100.0, weighted_recall * 100.0,
                  weighted_f1 * 100.0);
    out += buf;
    return out;
}

long ComplexityReport::params() const {
    long t = 0;
    for (const auto& l : layers) t += l.params;
    return t;
}

long ComplexityReport::flops() const {
    long t = 0;
    for (const auto& l : layers) t += l.flops;
    return t;
}

json ComplexityReport::to_json() const {
    json per = json::array();
    for (const auto& l : layers)
        per.push_back({{"name", l.name}, {"params", l.params}, {"flops", l.flops}});
    return {{"params", params()},
            {"flops", flops()},
            {"layers", per},
            {"flop_convention", "multiply and add counted separately (MAC = 2)"}};
}

}  // namespace csagc::metrics
