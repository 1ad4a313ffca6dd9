#include "csagc/balance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "csagc/checkpoint.hpp"
#include "csagc/errors.hpp"
#include "csagc/optim.hpp"
#include "csagc/rng.hpp"

namespace csagc::balance {

using ad::Tensor;
using nlohmann::json;

namespace {

void require_one_hot(const Tensor& cond) {
    if (cond.shape().size() != 2)
        throw ContractError("condition must be a [batch, classes] matrix");
    const int n = cond.shape()[0], c = cond.shape()[1];
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            const double v = cond.data()[static_cast<std::size_t>(i) * c + j];
            if (std::fabs(v) > 1e-9 && std::fabs(v - 1.0) > 1e-9)
                throw ContractError("condition row " + std::to_string(i) + " is not one-hot");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw ContractError("condition row " + std::to_string(i) + " is not one-hot");
    }
}

Tensor one_hot(const std::vector<int>& labels, int num_classes) {
    const int n = static_cast<int>(labels.size());
    std::vector<double> d(static_cast<std::size_t>(n) * num_classes, 0.0);
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw ContractError("label out of range: " + std::to_string(labels[i]));
        d[static_cast<std::size_t>(i) * num_classes + labels[i]] = 1.0;
    }
    return Tensor({n, num_classes}, std::move(d));
}

Tensor gather_rows(const dataset::FeatureMatrix& fm, const std::vector<int>& idx) {
    const int d = fm.cols();
    std::vector<double> out(idx.size() * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(fm.row(idx[i]), d, out.begin() + i * d);
    return Tensor({static_cast<int>(idx.size()), d}, std::move(out));
}

Tensor dense_lrelu(const Tensor& x, const Tensor& w, const Tensor& b, double slope) {
    return ad::leaky_relu(ad::linear_forward(x, w, b), slope);
}

}  // namespace

CsamBlock CsamBlock::init(int width, int attention_dim, int cond_dim, std::mt19937_64& rng) {
    if (width < 1 || attention_dim < 1)
        throw ConfigError("csam: width and attention_dim must be positive");
    CsamBlock b;
    b.width = width;
    b.attention_dim = attention_dim;
    b.cond_dim = cond_dim;
    b.tokens = (width + attention_dim - 1) / attention_dim;
    const int in = attention_dim + cond_dim;
    b.w_q = ad::he_normal({in, attention_dim}, in, rng);
    b.w_k = ad::he_normal({in, attention_dim}, in, rng);
    b.w_v = ad::he_normal({in, attention_dim}, in, rng);
    b.w_out = ad::he_normal({attention_dim, attention_dim}, attention_dim, rng);
    b.b_out = Tensor::zeros({attention_dim}, true);
    return b;
}

Tensor CsamBlock::forward(const Tensor& x, const Tensor& cond) const {
    require_one_hot(cond);
    if (x.shape().size() != 2 || x.shape()[1] != width)
        throw DimensionError("csam: expected input width " + std::to_string(width) + ", got " +
                             ad::shape_str(x.shape()));
    const int b = x.shape()[0], dk = attention_dim, T = tokens;
    Tensor padded = width == T * dk ? x : ad::pad_cols(x, T * dk);
    Tensor tok = ad::reshape(padded, {b, T, dk});
    Tensor aug = ad::token_concat(tok, cond);  // [b,T,dk+cond]
    Tensor flat = ad::reshape(aug, {b * T, dk + cond_dim});
    Tensor q = ad::reshape(ad::matmul(flat, w_q), {b, T, dk});
    Tensor k = ad::reshape(ad::matmul(flat, w_k), {b, T, dk});
    Tensor v = ad::reshape(ad::matmul(flat, w_v), {b, T, dk});
    Tensor scores = ad::mul_scalar(ad::batched_matmul(q, k, true), 1.0 / std::sqrt(double(dk)));
    Tensor p = ad::softmax(scores);
    Tensor attended = ad::batched_matmul(p, v);  // [b,T,dk]
    Tensor proj = ad::linear_forward(ad::reshape(attended, {b * T, dk}), w_out, b_out);
    Tensor restored = ad::reshape(proj, {b, T * dk});
    if (T * dk != width) restored = ad::slice_cols(restored, 0, width);
    return ad::add(x, restored);
}

void CsamBlock::collect(std::vector<std::pair<std::string, Tensor>>& out,
                        const std::string& prefix) const {
    out.emplace_back(prefix + ".w_q", w_q);
    out.emplace_back(prefix + ".w_k", w_k);
    out.emplace_back(prefix + ".w_v", w_v);
    out.emplace_back(prefix + ".w_out", w_out);
    out.emplace_back(prefix + ".b_out", b_out);
}

Tensor csam_forward(const CsamBlock& block, const Tensor& x, const Tensor& cond) {
    return block.forward(x, cond);
}

json GanConfig::to_json() const {
    return {{"feature_dim", feature_dim},
            {"noise_dim", noise_dim},
            {"cond_dim", cond_dim},
            {"gen_hidden", gen_hidden},
            {"attention_dim", attention_dim},
            {"disc_hidden", disc_hidden},
            {"disc_channels", disc_channels},
            {"disc_fusion_len", disc_fusion_len},
            {"conv_kernel", conv_kernel},
            {"dropout", dropout},
            {"leaky_slope", leaky_slope},
            {"lr_generator", lr_generator},
            {"lr_discriminator", lr_discriminator},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"seed", seed}};
}

GanConfig GanConfig::from_json(const json& j) {
    GanConfig c;
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.noise_dim = j.value("noise_dim", c.noise_dim);
    c.cond_dim = j.value("cond_dim", c.cond_dim);
    c.gen_hidden = j.value("gen_hidden", c.gen_hidden);
    c.attention_dim = j.value("attention_dim", c.attention_dim);
    c.disc_hidden = j.value("disc_hidden", c.disc_hidden);
    c.disc_channels = j.value("disc_channels", c.disc_channels);
    c.disc_fusion_len = j.value("disc_fusion_len", c.disc_fusion_len);
    c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
    c.dropout = j.value("dropout", c.dropout);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.lr_generator = j.value("lr_generator", c.lr_generator);
    c.lr_discriminator = j.value("lr_discriminator", c.lr_discriminator);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    return c;
}

Tensor Generator::forward(const Tensor& z, const Tensor& cond, double slope) const {
    Tensor h = ad::concat_cols(z, cond);
    h = dense_lrelu(h, fusion_w, fusion_b, slope);
    for (const auto& [w, b] : hidden_pre) h = dense_lrelu(h, w, b, slope);
    h = csam.forward(h, cond);
    for (const auto& [w, b] : hidden_post) h = dense_lrelu(h, w, b, slope);
    return ad::linear_forward(h, head_w, head_b);
}

Tensor Discriminator::forward(const Tensor& x, const Tensor& cond, double slope,
                              double dropout_rate, std::mt19937_64& rng, bool training) const {
    Tensor h = ad::concat_cols(x, cond);
    h = dense_lrelu(h, fusion_w, fusion_b, slope);
    const int b = h.shape()[0], len = h.shape()[1];
    Tensor c = ad::reshape(h, {b, 1, len});
    c = ad::maxpool1d(ad::leaky_relu(ad::conv1d_forward(c, conv1_k, conv1_b, 1, 1), slope), 2);
    c = ad::maxpool1d(ad::leaky_relu(ad::conv1d_forward(c, conv2_k, conv2_b, 1, 1), slope), 2);
    const int flat = c.shape()[1] * c.shape()[2];
    Tensor f = ad::reshape(c, {b, flat});
    f = ad::dropout(f, dropout_rate, rng, training);
    f = dense_lrelu(f, dense_w, dense_b, slope);
    return ad::sigmoid(ad::linear_forward(f, out_w, out_b));
}

GanModel GanModel::init(GanConfig cfg) {
    if (cfg.feature_dim < 1) throw ConfigError("gan: feature_dim must be set");
    if (cfg.noise_dim <= 0) cfg.noise_dim = cfg.feature_dim;
    auto rng = make_rng(cfg.seed, "gan-init");
    GanModel m;
    m.config = cfg;
    const int gh = cfg.gen_hidden, nd = cfg.noise_dim, cd = cfg.cond_dim, d = cfg.feature_dim;
    m.gen.fusion_w = ad::he_normal({nd + cd, gh}, nd + cd, rng);
    m.gen.fusion_b = Tensor::zeros({gh}, true);
    for (int i = 0; i < 3; ++i)
        m.gen.hidden_pre.emplace_back(ad::he_normal({gh, gh}, gh, rng), Tensor::zeros({gh}, true));
    m.gen.csam = CsamBlock::init(gh, cfg.attention_dim, cd, rng);
    for (int i = 0; i < 2; ++i)
        m.gen.hidden_post.emplace_back(ad::he_normal({gh, gh}, gh, rng),
                                       Tensor::zeros({gh}, true));
    m.gen.head_w = ad::he_normal({gh, d}, gh, rng);
    m.gen.head_b = Tensor::zeros({d}, true);

    const int fl = cfg.disc_fusion_len, ch = cfg.disc_channels, kk = cfg.conv_kernel;
    const int dh = cfg.disc_hidden;
    m.disc.fusion_w = ad::xavier_normal({d + cd, fl}, d + cd, fl, rng);
    m.disc.fusion_b = Tensor::zeros({fl}, true);
    m.disc.conv1_k = ad::xavier_normal({ch, 1, kk}, kk, ch * kk, rng);
    m.disc.conv1_b = Tensor::zeros({ch}, true);
    m.disc.conv2_k = ad::xavier_normal({ch, ch, kk}, ch * kk, ch * kk, rng);
    m.disc.conv2_b = Tensor::zeros({ch}, true);
    const int flat = ch * (fl / 4);
    m.disc.dense_w = ad::xavier_normal({flat, dh}, flat, dh, rng);
    m.disc.dense_b = Tensor::zeros({dh}, true);
    m.disc.out_w = ad::xavier_normal({dh, 1}, dh, 1, rng);
    m.disc.out_b = Tensor::zeros({1}, true);
    return m;
}

std::vector<Tensor> GanModel::generator_params() {
    std::vector<Tensor> p = {gen.fusion_w, gen.fusion_b};
    for (auto& [w, b] : gen.hidden_pre) {
        p.push_back(w);
        p.push_back(b);
    }
    p.insert(p.end(), {gen.csam.w_q, gen.csam.w_k, gen.csam.w_v, gen.csam.w_out,
                       gen.csam.b_out});
    for (auto& [w, b] : gen.hidden_post) {
        p.push_back(w);
        p.push_back(b);
    }
    p.push_back(gen.head_w);
    p.push_back(gen.head_b);
    return p;
}

std::vector<Tensor> GanModel::discriminator_params() {
    return {disc.fusion_w, disc.fusion_b, disc.conv1_k, disc.conv1_b, disc.conv2_k,
            disc.conv2_b,  disc.dense_w,  disc.dense_b, disc.out_w,   disc.out_b};
}

std::vector<std::pair<std::string, Tensor>> GanModel::named_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("gen.fusion_w", gen.fusion_w);
    out.emplace_back("gen.fusion_b", gen.fusion_b);
    for (std::size_t i = 0; i < gen.hidden_pre.size(); ++i) {
        out.emplace_back("gen.pre" + std::to_string(i) + ".w", gen.hidden_pre[i].first);
        out.emplace_back("gen.pre" + std::to_string(i) + ".b", gen.hidden_pre[i].second);
    }
    gen.csam.collect(out, "gen.csam");
    for (std::size_t i = 0; i < gen.hidden_post.size(); ++i) {
        out.emplace_back("gen.post" + std::to_string(i) + ".w", gen.hidden_post[i].first);
        out.emplace_back("gen.post" + std::to_string(i) + ".b", gen.hidden_post[i].second);
    }
    out.emplace_back("gen.head_w", gen.head_w);
    out.emplace_back("gen.head_b", gen.head_b);
    out.emplace_back("disc.fusion_w", disc.fusion_w);
    out.emplace_back("disc.fusion_b", disc.fusion_b);
    out.emplace_back("disc.conv1_k", disc.conv1_k);
    out.emplace_back("disc.conv1_b", disc.conv1_b);
    out.emplace_back("disc.conv2_k", disc.conv2_k);
    out.emplace_back("disc.conv2_b", disc.conv2_b);
    out.emplace_back("disc.dense_w", disc.dense_w);
    out.emplace_back("disc.dense_b", disc.dense_b);
    out.emplace_back("disc.out_w", disc.out_w);
    out.emplace_back("disc.out_b", disc.out_b);
    return out;
}

void GanModel::save(const std::string& path) const {
    auto self = const_cast<GanModel*>(this);
    io::save_checkpoint(path, "gan", config.to_json(), self->named_params());
}

GanModel GanModel::load(const std::string& path) {
    io::Checkpoint ck = io::load_checkpoint(path);
    if (ck.kind() != "gan") throw ParseError(path + ": expected a gan checkpoint");
    GanModel m = GanModel::init(GanConfig::from_json(ck.config()));
    for (auto& [name, t] : m.named_params()) {
        auto it = ck.params.find(name);
        if (it == ck.params.end()) throw ParseError(path + ": missing parameter " + name);
        if (it->second.shape() != t.shape())
            throw DimensionError(path + ": shape mismatch for " + name);
        t.data() = it->second.data();
    }
    return m;
}

namespace {

void require_probabilities(const Tensor& t, const char* what) {
    for (double v : t.data())
        if (!(v >= 0.0 && v <= 1.0))
            throw ContractError(std::string(what) + " outside [0,1]: " + std::to_string(v));
}

}  // namespace

Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake) {
    require_probabilities(d_real, "discriminator output (real)");
    require_probabilities(d_fake, "discriminator output (fake)");
    Tensor term_real = ad::mean(ad::log_clamped(d_real));
    Tensor one_minus = ad::add_scalar(ad::mul_scalar(d_fake, -1.0), 1.0);
    Tensor term_fake = ad::mean(ad::log_clamped(one_minus));
    return ad::mul_scalar(ad::add(term_real, term_fake), -1.0);
}

Tensor generator_loss(const Tensor& d_fake) {
    require_probabilities(d_fake, "discriminator output (fake)");
    return ad::mul_scalar(ad::mean(ad::log_clamped(d_fake)), -1.0);
}

GanModel train_scgan(const dataset::FeatureMatrix& train, GanConfig cfg,
                     std::vector<EpochLog>* log) {
    if (cfg.feature_dim <= 0) cfg.feature_dim = train.cols();
    if (cfg.feature_dim != train.cols())
        throw DimensionError("gan: config feature_dim " + std::to_string(cfg.feature_dim) +
                             " does not match data width " + std::to_string(train.cols()));
    std::vector<long> counts(cfg.cond_dim, 0);
    for (int l : train.labels) {
        if (l < 0 || l >= cfg.cond_dim)
            throw ContractError("gan: label " + std::to_string(l) + " outside cond_dim");
        counts[l] += 1;
    }
    for (int c = 0; c < cfg.cond_dim; ++c)
        if (counts[c] == 0)
            throw ContractError("gan: class " + std::to_string(c) + " has no training samples");

    GanModel model = GanModel::init(cfg);
    cfg = model.config;  // noise_dim resolved
    auto rng = make_rng(cfg.seed, "gan-train");
    auto gparams = model.generator_params();
    auto dparams = model.discriminator_params();
    auto gstate = ad::AdamState::init(gparams);
    auto dstate = ad::AdamState::init(dparams);

    std::vector<int> order(train.rows());
    std::iota(order.begin(), order.end(), 0);
    std::uniform_int_distribution<int> label_dist(0, cfg.cond_dim - 1);
    std::normal_distribution<double> noise;

    auto sample_noise_and_labels = [&](int m, Tensor& z, Tensor& cond) {
        std::vector<double> zd(static_cast<std::size_t>(m) * cfg.noise_dim);
        for (double& v : zd) v = noise(rng);
        z = Tensor({m, cfg.noise_dim}, std::move(zd));
        std::vector<int> labels(m);
        for (int& l : labels) l = label_dist(rng);
        cond = one_hot(labels, cfg.cond_dim);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum_ld = 0.0, sum_lg = 0.0;
        int batches = 0;
        for (int start = 0; start < train.rows(); start += cfg.batch_size) {
            const int m = std::min(cfg.batch_size, train.rows() - start);
            std::vector<int> idx(order.begin() + start, order.begin() + start + m);
            Tensor x_real = gather_rows(train, idx);
            std::vector<int> real_labels(m);
            for (int i = 0; i < m; ++i) real_labels[i] = train.labels[idx[i]];
            Tensor cond_real = one_hot(real_labels, cfg.cond_dim);

            // discriminator step
            Tensor z, cond_fake;
            sample_noise_and_labels(m, z, cond_fake);
            Tensor x_fake = ad::detach(model.gen.forward(z, cond_fake, cfg.leaky_slope));
            Tensor d_real = model.disc.forward(x_real, cond_real, cfg.leaky_slope, cfg.dropout,
                                               rng, true);
            Tensor d_fake = model.disc.forward(x_fake, cond_fake, cfg.leaky_slope, cfg.dropout,
                                               rng, true);
            Tensor ld = discriminator_loss(d_real, d_fake);
            if (!ad::all_finite(ld))
                throw TrainingError("gan: discriminator loss diverged at epoch " +
                                        std::to_string(epoch),
                                    epoch - 1);
            ad::zero_grads(dparams);
            ad::backward(ld);
            ad::adam_step(dparams, dstate, cfg.lr_discriminator);

            // generator step
            Tensor z2, cond_g;
            sample_noise_and_labels(m, z2, cond_g);
            Tensor gen_out = model.gen.forward(z2, cond_g, cfg.leaky_slope);
            Tensor d_gen = model.disc.forward(gen_out, cond_g, cfg.leaky_slope, cfg.dropout,
                                              rng, true);
            Tensor lg = generator_loss(d_gen);
            if (!ad::all_finite(lg))
                throw TrainingError("gan: generator loss diverged at epoch " +
                                        std::to_string(epoch),
                                    epoch - 1);
            ad::zero_grads(gparams);
            ad::zero_grads(dparams);
            ad::backward(lg);
            ad::adam_step(gparams, gstate, cfg.lr_generator);
            ad::zero_grads(gparams);
            ad::zero_grads(dparams);

            sum_ld += ld.item();
            sum_lg += lg.item();
            ++batches;
        }
        if (log && batches > 0) log->push_back({sum_ld / batches, sum_lg / batches});
    }
    return model;
}

std::vector<long> make_balance_plan(const std::vector<long>& counts) {
    std::vector<long> plan(counts.size(), 0);
    if (counts.empty()) return plan;
    const long mx = *std::max_element(counts.begin(), counts.end());
    for (std::size_t c = 0; c < counts.size(); ++c) plan[c] = mx - counts[c];
    return plan;
}

std::vector<long> make_balance_plan(const dataset::ClassStats& stats) {
    return make_balance_plan(std::vector<long>(stats.counts.begin(), stats.counts.end()));
}

Tensor generate(const GanModel& model, int class_id, int n, std::mt19937_64& rng) {
    const auto& cfg = model.config;
    if (class_id < 0 || class_id >= cfg.cond_dim)
        throw ContractError("generate: class id " + std::to_string(class_id) + " out of range");
    if (n < 0) throw ContractError("generate: n must be non-negative");
    if (n == 0) return Tensor({0, cfg.feature_dim}, {});
    std::normal_distribution<double> noise;
    std::vector<double> zd(static_cast<std::size_t>(n) * cfg.noise_dim);
    for (double& v : zd) v = noise(rng);
    Tensor z({n, cfg.noise_dim}, std::move(zd));
    Tensor cond = one_hot(std::vector<int>(n, class_id), cfg.cond_dim);
    return ad::detach(model.gen.forward(z, cond, cfg.leaky_slope));
}

namespace {

dataset::FeatureMatrix with_extra_rows(const dataset::FeatureMatrix& data,
                                       const std::vector<double>& extra,
                                       const std::vector<int>& extra_labels) {
    const int d = data.cols();
    const int n_extra = static_cast<int>(extra_labels.size());
    std::vector<double> values = data.values.data();
    values.insert(values.end(), extra.begin(), extra.end());
    dataset::FeatureMatrix out;
    out.values = Tensor({data.rows() + n_extra, d}, std::move(values));
    out.labels = data.labels;
    out.labels.insert(out.labels.end(), extra_labels.begin(), extra_labels.end());
    out.feature_names = data.feature_names;
    out.mu = data.mu;
    out.sigma = data.sigma;
    out.unseen_category_count = data.unseen_category_count;
    return out;
}

std::vector<std::vector<int>> rows_by_class(const dataset::FeatureMatrix& data,
                                            std::size_t num_classes) {
    std::vector<std::vector<int>> by_class(num_classes);
    for (int i = 0; i < data.rows(); ++i) {
        const int l = data.labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
            throw ContractError("plan does not cover label " + std::to_string(l));
        by_class[l].push_back(i);
    }
    return by_class;
}

}  // namespace

dataset::FeatureMatrix augment_with_gan(const dataset::FeatureMatrix& data,
                                        const GanModel& model, const std::vector<long>& plan,
                                        std::mt19937_64& rng) {
    const int d = data.cols();
    std::vector<double> extra;
    std::vector<int> extra_labels;
    for (std::size_t c = 0; c < plan.size(); ++c) {
        if (plan[c] <= 0) continue;
        Tensor gen = generate(model, static_cast<int>(c), static_cast<int>(plan[c]), rng);
        extra.insert(extra.end(), gen.data().begin(), gen.data().end());
        extra_labels.insert(extra_labels.end(), plan[c], static_cast<int>(c));
    }
    (void)d;
    return with_extra_rows(data, extra, extra_labels);
}

dataset::FeatureMatrix random_oversample(const dataset::FeatureMatrix& data,
                                         const std::vector<long>& plan, std::mt19937_64& rng) {
    auto by_class = rows_by_class(data, plan.size());
    const int d = data.cols();
    std::vector<double> extra;
    std::vector<int> extra_labels;
    for (std::size_t c = 0; c < plan.size(); ++c) {
        if (plan[c] <= 0) continue;
        if (by_class[c].empty())
            throw ContractError("random_oversample: class " + std::to_string(c) +
                                " has no rows to duplicate");
        std::uniform_int_distribution<std::size_t> pick(0, by_class[c].size() - 1);
        for (long i = 0; i < plan[c]; ++i) {
            const int row = by_class[c][pick(rng)];
            extra.insert(extra.end(), data.row(row), data.row(row) + d);
            extra_labels.push_back(static_cast<int>(c));
        }
    }
    return with_extra_rows(data, extra, extra_labels);
}

dataset::FeatureMatrix smote(const dataset::FeatureMatrix& data, const std::vector<long>& plan,
                             int k, std::mt19937_64& rng, std::vector<std::string>* warnings) {
    if (k < 1) throw ContractError("smote: k must be >= 1");
    auto by_class = rows_by_class(data, plan.size());
    const int d = data.cols();
    std::vector<double> extra;
    std::vector<int> extra_labels;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 0; c < plan.size(); ++c) {
        if (plan[c] <= 0) continue;
        const auto& rows = by_class[c];
        if (rows.empty())
            throw ContractError("smote: class " + std::to_string(c) + " has no rows");
        if (rows.size() == 1) {
            if (warnings)
                warnings->push_back("smote: class " + std::to_string(c) +
                                    " has a single sample; falling back to duplication");
            for (long i = 0; i < plan[c]; ++i) {
                extra.insert(extra.end(), data.row(rows[0]), data.row(rows[0]) + d);
                extra_labels.push_back(static_cast<int>(c));
            }
            continue;
        }
        const int k_eff = std::min<int>(k, static_cast<int>(rows.size()) - 1);
        std::map<int, std::vector<int>> neighbor_cache;
        std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
        std::uniform_int_distribution<int> pick_nb(0, k_eff - 1);
        for (long i = 0; i < plan[c]; ++i) {
            const int base = rows[pick(rng)];
            auto it = neighbor_cache.find(base);
            if (it == neighbor_cache.end()) {
                std::vector<std::pair<double, int>> dist;
                dist.reserve(rows.size() - 1);
                for (int other : rows) {
                    if (other == base) continue;
                    double s = 0.0;
                    const double* a = data.row(base);
                    const double* b = data.row(other);
                    for (int j = 0; j < d; ++j) {
                        const double diff = a[j] - b[j];
                        s += diff * diff;
                    }
                    dist.emplace_back(s, other);
                }
                std::partial_sort(dist.begin(), dist.begin() + k_eff, dist.end());
                std::vector<int> nbs(k_eff);
                for (int j = 0; j < k_eff; ++j) nbs[j] = dist[j].second;
                it = neighbor_cache.emplace(base, std::move(nbs)).first;
            }
            const int nb = it->second[pick_nb(rng)];
            const double u = unit(rng);
            const double* a = data.row(base);
            const double* b = data.row(nb);
            for (int j = 0; j < d; ++j) extra.push_back(a[j] + u * (b[j] - a[j]));
            extra_labels.push_back(static_cast<int>(c));
        }
    }
    return with_extra_rows(data, extra, extra_labels);
}

}  // namespace csagc::balance
