#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csagc/dataset.hpp"
#include "csagc/metrics.hpp"
#include "csagc/tensor.hpp"

namespace csagc::classifier {

// CBAM channel-attention branch: shared two-layer bottleneck MLP over the
// average- and max-pooled channel descriptors, sigmoid gate per channel.
struct CamBlock {
    int channels = 0;
    int squeeze = 0;
    ad::Tensor w1;  // [ch, ch/r]
    ad::Tensor w2;  // [ch/r, ch]

    static CamBlock init(int channels, int squeeze_ratio, std::mt19937_64& rng);
    ad::Tensor forward(const ad::Tensor& featmap) const;  // [b,c,l] -> [b,c,l]
};

ad::Tensor cam_forward(const CamBlock& block, const ad::Tensor& featmap);

// Per-class loss weights, normalized to mean 1.
using CostMatrix = std::vector<double>;

enum class CostScheme { InverseFrequency, Uniform, Custom };

CostMatrix cost_weights(const std::vector<long>& class_counts, CostScheme scheme,
                        const std::vector<double>& custom = {});
CostMatrix cost_weights(const dataset::ClassStats& stats, CostScheme scheme,
                        const std::vector<double>& custom = {});

// Cost-sensitive cross entropy, mean over the batch, probability
// floor 1e-12. `probs` rows must sum to 1 (tolerance 1e-6), `targets` one-hot.
ad::Tensor cs_ce_loss(const ad::Tensor& probs, const ad::Tensor& targets, const CostMatrix& w);

struct ClassifierConfig {
    int feature_dim = 0;
    int num_classes = dataset::kNumClasses;
    int channels = 40;
    int kernel = 3;
    int conv_blocks = 3;
    int squeeze_ratio = 8;
    int dense_hidden = 40;
    double dropout = 0.3;
    double leaky_slope = 0.01;
    bool use_cam = true;
    double lr = 0.01;
    int batch_size = 128;
    int max_epochs = 60;
    int patience = 10;
    double val_fraction = 0.1;
    std::string cost_scheme = "inverse-frequency";  // or "uniform" / "custom"
    std::vector<double> cost_custom;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static ClassifierConfig from_json(const nlohmann::json& j);
};

struct ClassifierModel {
    ClassifierConfig config;
    std::vector<std::pair<ad::Tensor, ad::Tensor>> convs;  // kernels [ch,ci,k] + bias
    std::vector<CamBlock> cams;
    ad::Tensor dense_w, dense_b;
    ad::Tensor out_w, out_b;
    CostMatrix cost;

    static ClassifierModel init(ClassifierConfig cfg);
    ad::Tensor forward(const ad::Tensor& x, std::mt19937_64& rng, bool training) const;  // logits
    std::vector<ad::Tensor> params();
    std::vector<std::pair<std::string, ad::Tensor>> named_params();
    metrics::ComplexityReport complexity() const;

    void save(const std::string& path) const;
    static ClassifierModel load(const std::string& path);
};

struct Prediction {
    ad::Tensor probs;         // [n, C]
    std::vector<int> labels;  // argmax, lowest index on exact ties
};

Prediction predict(const ClassifierModel& model, const ad::Tensor& x);

struct TrainLogEntry {
    double train_loss = 0.0;
    double val_weighted_f1 = 0.0;
};

// Mini-batch Adam on cs_ce_loss with early stopping on validation
// weighted F1 (stratified split); returns the best-validation model.
ClassifierModel train_cscacnn(const dataset::FeatureMatrix& data, ClassifierConfig cfg,
                              std::vector<TrainLogEntry>* log = nullptr);

}  // namespace csagc::classifier
