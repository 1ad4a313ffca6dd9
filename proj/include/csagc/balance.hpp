#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csagc/dataset.hpp"
#include "csagc/tensor.hpp"

namespace csagc::balance {

// Conditional self-attention block with a residual connection. The input
// vector is reshaped into T tokens of attention_dim channels (zero-padded),
// the one-hot condition is concatenated to every token before the Q/K/V
// projections, and scaled dot-product attention runs per sample over the
// token axis. The projected attention output is added back onto the input.
struct CsamBlock {
    int width = 0;
    int attention_dim = 0;
    int cond_dim = 0;
    int tokens = 0;
    ad::Tensor w_q, w_k, w_v;  // [attention_dim + cond_dim, attention_dim]
    ad::Tensor w_out, b_out;   // [attention_dim, attention_dim], [attention_dim]

    static CsamBlock init(int width, int attention_dim, int cond_dim, std::mt19937_64& rng);
    ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& cond) const;
    void collect(std::vector<std::pair<std::string, ad::Tensor>>& out,
                 const std::string& prefix) const;
};

ad::Tensor csam_forward(const CsamBlock& block, const ad::Tensor& x, const ad::Tensor& cond);

struct GanConfig {
    int feature_dim = 0;  // encoded dimension D; must be set
    int noise_dim = 123;  // defaults to feature_dim when <= 0
    int cond_dim = dataset::kNumClasses;
    int gen_hidden = 100;
    int attention_dim = 30;
    int disc_hidden = 60;
    int disc_channels = 60;
    int disc_fusion_len = 120;
    int conv_kernel = 3;
    double dropout = 0.3;
    double leaky_slope = 0.2;
    double lr_generator = 0.001;
    double lr_discriminator = 0.000005;
    int batch_size = 128;
    int epochs = 30;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static GanConfig from_json(const nlohmann::json& j);
};

// Generator: fusion dense -> 3 hidden dense -> CSAM (+residual) -> 2 hidden
// dense -> linear output head. He-initialized.
struct Generator {
    ad::Tensor fusion_w, fusion_b;
    std::vector<std::pair<ad::Tensor, ad::Tensor>> hidden_pre;   // 3 layers
    CsamBlock csam;
    std::vector<std::pair<ad::Tensor, ad::Tensor>> hidden_post;  // 2 layers
    ad::Tensor head_w, head_b;

    ad::Tensor forward(const ad::Tensor& z, const ad::Tensor& cond, double slope) const;
};

// Discriminator: condition fusion dense -> 2 x [conv1d -> LeakyReLU ->
// maxpool2] -> dropout -> dense -> dense -> sigmoid. Xavier-initialized.
struct Discriminator {
    ad::Tensor fusion_w, fusion_b;
    ad::Tensor conv1_k, conv1_b, conv2_k, conv2_b;
    ad::Tensor dense_w, dense_b, out_w, out_b;

    ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& cond, double slope,
                       double dropout_rate, std::mt19937_64& rng, bool training) const;
};

struct GanModel {
    GanConfig config;
    Generator gen;
    Discriminator disc;

    static GanModel init(GanConfig cfg);
    std::vector<ad::Tensor> generator_params();
    std::vector<ad::Tensor> discriminator_params();
    std::vector<std::pair<std::string, ad::Tensor>> named_params();

    void save(const std::string& path) const;
    static GanModel load(const std::string& path);
};

// Standard non-saturating adversarial losses over sigmoid discriminator outputs.
ad::Tensor discriminator_loss(const ad::Tensor& d_real, const ad::Tensor& d_fake);
ad::Tensor generator_loss(const ad::Tensor& d_fake);

struct EpochLog {
    double loss_d = 0.0;
    double loss_g = 0.0;
};

GanModel train_scgan(const dataset::FeatureMatrix& train, GanConfig cfg,
                     std::vector<EpochLog>* log = nullptr);

// plan[c] = max_count - count[c]
std::vector<long> make_balance_plan(const std::vector<long>& counts);
std::vector<long> make_balance_plan(const dataset::ClassStats& stats);

// n class-conditioned samples in standardized feature space, shape [n, D]
ad::Tensor generate(const GanModel& model, int class_id, int n, std::mt19937_64& rng);

// appends generated rows per plan; original rows are preserved verbatim
dataset::FeatureMatrix augment_with_gan(const dataset::FeatureMatrix& data,
                                        const GanModel& model, const std::vector<long>& plan,
                                        std::mt19937_64& rng);

dataset::FeatureMatrix random_oversample(const dataset::FeatureMatrix& data,
                                         const std::vector<long>& plan, std::mt19937_64& rng);

dataset::FeatureMatrix smote(const dataset::FeatureMatrix& data, const std::vector<long>& plan,
                             int k, std::mt19937_64& rng,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace csagc::balance
