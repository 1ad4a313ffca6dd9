#include "csagc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csagc/checkpoint.hpp"
#include "csagc/errors.hpp"
#include "csagc/optim.hpp"
#include "csagc/rng.hpp"

namespace csagc::classifier {

using ad::Tensor;
using nlohmann::json;

CamBlock CamBlock::init(int channels, int squeeze_ratio, std::mt19937_64& rng) {
    if (squeeze_ratio < 1 || channels < squeeze_ratio)
        throw ConfigError("cam: need channels >= squeeze ratio, got " +
                          std::to_string(channels) + " / " + std::to_string(squeeze_ratio));
    CamBlock b;
    b.channels = channels;
    b.squeeze = channels / squeeze_ratio;
    b.w1 = ad::he_normal({channels, b.squeeze}, channels, rng);
    b.w2 = ad::he_normal({b.squeeze, channels}, b.squeeze, rng);
    return b;
}

Tensor CamBlock::forward(const Tensor& featmap) const {
    if (featmap.shape().size() != 3 || featmap.shape()[1] != channels)
        throw DimensionError("cam: expected [batch," + std::to_string(channels) +
                             ",len], got " + ad::shape_str(featmap.shape()));
    auto mlp = [&](const Tensor& s) { return ad::matmul(ad::relu(ad::matmul(s, w1)), w2); };
    Tensor avg = ad::channel_avg(featmap);
    Tensor mx = ad::channel_max(featmap);
    Tensor gate = ad::sigmoid(ad::add(mlp(avg), mlp(mx)));
    return ad::scale_channels(featmap, gate);
}

Tensor cam_forward(const CamBlock& block, const Tensor& featmap) {
    return block.forward(featmap);
}

CostMatrix cost_weights(const std::vector<long>& class_counts, CostScheme scheme,
                        const std::vector<double>& custom) {
    const std::size_t c = class_counts.size();
    CostMatrix w(c, 1.0);
    switch (scheme) {
        case CostScheme::Uniform:
            return w;
        case CostScheme::InverseFrequency: {
            for (std::size_t i = 0; i < c; ++i) {
                if (class_counts[i] <= 0)
                    throw ConfigError("cost_weights: class " + std::to_string(i) +
                                      " has zero count under inverse-frequency scheme");
                w[i] = 1.0 / static_cast<double>(class_counts[i]);
            }
            break;
        }
        case CostScheme::Custom: {
            if (custom.size() != c)
                throw ConfigError("cost_weights: custom vector length mismatch");
            w = custom;
            for (double v : w)
                if (!(v > 0.0)) throw ConfigError("cost_weights: weights must be positive");
            break;
        }
    }
    double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(c);
    for (double& v : w) v /= mean;
    return w;
}

CostMatrix cost_weights(const dataset::ClassStats& stats, CostScheme scheme,
                        const std::vector<double>& custom) {
    return cost_weights(std::vector<long>(stats.counts.begin(), stats.counts.end()), scheme,
                        custom);
}

Tensor cs_ce_loss(const Tensor& probs, const Tensor& targets, const CostMatrix& w) {
    if (probs.shape().size() != 2 || probs.shape() != targets.shape())
        throw DimensionError("cs_ce_loss: probs " + ad::shape_str(probs.shape()) +
                             " vs targets " + ad::shape_str(targets.shape()));
    const int n = probs.shape()[0], c = probs.shape()[1];
    if (static_cast<int>(w.size()) != c)
        throw DimensionError("cs_ce_loss: weight vector length " + std::to_string(w.size()) +
                             " for " + std::to_string(c) + " classes");
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        int ones = 0;
        for (int j = 0; j < c; ++j) {
            sum += probs.data()[static_cast<std::size_t>(i) * c + j];
            const double y = targets.data()[static_cast<std::size_t>(i) * c + j];
            if (y == 1.0)
                ++ones;
            else if (y != 0.0)
                throw ContractError("cs_ce_loss: target row " + std::to_string(i) +
                                    " is not one-hot");
        }
        if (std::fabs(sum - 1.0) > 1e-6)
            throw ContractError("cs_ce_loss: probability row " + std::to_string(i) +
                                " sums to " + std::to_string(sum));
        if (ones != 1)
            throw ContractError("cs_ce_loss: target row " + std::to_string(i) +
                                " is not one-hot");
    }
    Tensor wt({c}, std::vector<double>(w.begin(), w.end()));
    Tensor picked = ad::row_scale(ad::mul(targets, ad::log_clamped(probs)), wt);
    return ad::mul_scalar(ad::sum(picked), -1.0 / n);
}

json ClassifierConfig::to_json() const {
    return {{"feature_dim", feature_dim},
            {"num_classes", num_classes},
            {"channels", channels},
            {"kernel", kernel},
            {"conv_blocks", conv_blocks},
            {"squeeze_ratio", squeeze_ratio},
            {"dense_hidden", dense_hidden},
            {"dropout", dropout},
            {"leaky_slope", leaky_slope},
            {"use_cam", use_cam},
            {"lr", lr},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"val_fraction", val_fraction},
            {"cost_scheme", cost_scheme},
            {"cost_custom", cost_custom},
            {"seed", seed}};
}

ClassifierConfig ClassifierConfig::from_json(const json& j) {
    ClassifierConfig c;
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.channels = j.value("channels", c.channels);
    c.kernel = j.value("kernel", c.kernel);
    c.conv_blocks = j.value("conv_blocks", c.conv_blocks);
    c.squeeze_ratio = j.value("squeeze_ratio", c.squeeze_ratio);
    c.dense_hidden = j.value("dense_hidden", c.dense_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.use_cam = j.value("use_cam", c.use_cam);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.cost_scheme = j.value("cost_scheme", c.cost_scheme);
    c.cost_custom = j.value("cost_custom", c.cost_custom);
    c.seed = j.value("seed", c.seed);
    return c;
}

namespace {

// conv keeps length via symmetric padding for odd kernels; maxpool halves
int length_after_blocks(const ClassifierConfig& cfg) {
    int len = cfg.feature_dim;
    for (int i = 0; i < cfg.conv_blocks; ++i) {
        len = len + 2 * ((cfg.kernel - 1) / 2) - cfg.kernel + 1;
        if (len < 2)
            throw ConfigError("classifier: feature_dim too small for " +
                              std::to_string(cfg.conv_blocks) + " conv blocks");
        len /= 2;
    }
    return len;
}

}  // namespace

ClassifierModel ClassifierModel::init(ClassifierConfig cfg) {
    if (cfg.feature_dim < 1) throw ConfigError("classifier: feature_dim must be set");
    if (cfg.num_classes < 2) throw ConfigError("classifier: need at least 2 classes");
    auto rng = make_rng(cfg.seed, "classifier-init");
    ClassifierModel m;
    m.config = cfg;
    for (int i = 0; i < cfg.conv_blocks; ++i) {
        const int cin = i == 0 ? 1 : cfg.channels;
        m.convs.emplace_back(ad::he_normal({cfg.channels, cin, cfg.kernel}, cin * cfg.kernel, rng),
                             Tensor::zeros({cfg.channels}, true));
        if (cfg.use_cam) m.cams.push_back(CamBlock::init(cfg.channels, cfg.squeeze_ratio, rng));
    }
    const int flat = cfg.channels * length_after_blocks(cfg);
    m.dense_w = ad::he_normal({flat, cfg.dense_hidden}, flat, rng);
    m.dense_b = Tensor::zeros({cfg.dense_hidden}, true);
    m.out_w = ad::he_normal({cfg.dense_hidden, cfg.num_classes}, cfg.dense_hidden, rng);
    m.out_b = Tensor::zeros({cfg.num_classes}, true);
    m.cost.assign(cfg.num_classes, 1.0);
    return m;
}

Tensor ClassifierModel::forward(const Tensor& x, std::mt19937_64& rng, bool training) const {
    if (x.shape().size() != 2 || x.shape()[1] != config.feature_dim)
        throw DimensionError("classifier: expected [n," + std::to_string(config.feature_dim) +
                             "], got " + ad::shape_str(x.shape()));
    const int b = x.shape()[0];
    Tensor c = ad::reshape(x, {b, 1, config.feature_dim});
    const int pad = (config.kernel - 1) / 2;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        c = ad::leaky_relu(ad::conv1d_forward(c, convs[i].first, convs[i].second, 1, pad),
                           config.leaky_slope);
        if (config.use_cam) c = cams[i].forward(c);
        c = ad::maxpool1d(c, 2);
    }
    Tensor f = ad::reshape(c, {b, c.shape()[1] * c.shape()[2]});
    f = ad::leaky_relu(ad::linear_forward(f, dense_w, dense_b), config.leaky_slope);
    f = ad::dropout(f, config.dropout, rng, training);
    return ad::linear_forward(f, out_w, out_b);
}

std::vector<Tensor> ClassifierModel::params() {
    std::vector<Tensor> p;
    for (auto& [k, b] : convs) {
        p.push_back(k);
        p.push_back(b);
    }
    for (auto& cam : cams) {
        p.push_back(cam.w1);
        p.push_back(cam.w2);
    }
    p.insert(p.end(), {dense_w, dense_b, out_w, out_b});
    return p;
}

std::vector<std::pair<std::string, Tensor>> ClassifierModel::named_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        out.emplace_back("conv" + std::to_string(i) + ".k", convs[i].first);
        out.emplace_back("conv" + std::to_string(i) + ".b", convs[i].second);
    }
    for (std::size_t i = 0; i < cams.size(); ++i) {
        out.emplace_back("cam" + std::to_string(i) + ".w1", cams[i].w1);
        out.emplace_back("cam" + std::to_string(i) + ".w2", cams[i].w2);
    }
    out.emplace_back("dense.w", dense_w);
    out.emplace_back("dense.b", dense_b);
    out.emplace_back("out.w", out_w);
    out.emplace_back("out.b", out_b);
    return out;
}

metrics::ComplexityReport ClassifierModel::complexity() const {
    metrics::ComplexityReport rep;
    const auto& cfg = config;
    int len = cfg.feature_dim;
    const int pad = (cfg.kernel - 1) / 2;
    for (int i = 0; i < cfg.conv_blocks; ++i) {
        const int cin = i == 0 ? 1 : cfg.channels;
        const int len_out = len + 2 * pad - cfg.kernel + 1;
        rep.layers.push_back({"conv" + std::to_string(i),
                              static_cast<long>(cfg.channels) * cin * cfg.kernel + cfg.channels,
                              2L * cfg.kernel * cin * cfg.channels * len_out});
        if (cfg.use_cam) {
            const int sq = cfg.channels / cfg.squeeze_ratio;
            rep.layers.push_back({"cam" + std::to_string(i),
                                  2L * cfg.channels * sq,
                                  8L * cfg.channels * sq +
                                      static_cast<long>(cfg.channels) * len_out});
        }
        rep.layers.push_back({"maxpool" + std::to_string(i), 0, 0});
        len = len_out / 2;
    }
    const long flat = static_cast<long>(cfg.channels) * len;
    rep.layers.push_back(
        {"dense", flat * cfg.dense_hidden + cfg.dense_hidden, 2L * flat * cfg.dense_hidden});
    rep.layers.push_back({"out", static_cast<long>(cfg.dense_hidden) * cfg.num_classes +
                                     cfg.num_classes,
                          2L * cfg.dense_hidden * cfg.num_classes});
    return rep;
}

void ClassifierModel::save(const std::string& path) const {
    auto self = const_cast<ClassifierModel*>(this);
    json cfg = config.to_json();
    cfg["cost_weights"] = cost;
    io::save_checkpoint(path, "classifier", cfg, self->named_params());
}

ClassifierModel ClassifierModel::load(const std::string& path) {
    io::Checkpoint ck = io::load_checkpoint(path);
    if (ck.kind() != "classifier") throw ParseError(path + ": expected a classifier checkpoint");
    ClassifierModel m = ClassifierModel::init(ClassifierConfig::from_json(ck.config()));
    m.cost = ck.config().value("cost_weights", m.cost);
    for (auto& [name, t] : m.named_params()) {
        auto it = ck.params.find(name);
        if (it == ck.params.end()) throw ParseError(path + ": missing parameter " + name);
        if (it->second.shape() != t.shape())
            throw DimensionError(path + ": shape mismatch for " + name);
        t.data() = it->second.data();
    }
    return m;
}

Prediction predict(const ClassifierModel& model, const Tensor& x) {
    if (x.shape().size() != 2 || x.shape()[1] != model.config.feature_dim)
        throw DimensionError("predict: expected [n," + std::to_string(model.config.feature_dim) +
                             "], got " + ad::shape_str(x.shape()));
    const int n = x.shape()[0], c = model.config.num_classes;
    std::mt19937_64 unused(0);
    Prediction pred;
    std::vector<double> probs(static_cast<std::size_t>(n) * c);
    pred.labels.resize(n);
    const int chunk = 256;
    for (int start = 0; start < n; start += chunk) {
        const int m = std::min(chunk, n - start);
        std::vector<double> rows(static_cast<std::size_t>(m) * model.config.feature_dim);
        std::copy_n(x.data().begin() + static_cast<std::size_t>(start) * model.config.feature_dim,
                    rows.size(), rows.begin());
        Tensor batch({m, model.config.feature_dim}, std::move(rows));
        Tensor p = ad::softmax(model.forward(batch, unused, false));
        std::copy_n(p.data().begin(), p.data().size(),
                    probs.begin() + static_cast<std::size_t>(start) * c);
    }
    for (int i = 0; i < n; ++i) {
        const double* row = probs.data() + static_cast<std::size_t>(i) * c;
        pred.labels[i] = static_cast<int>(std::max_element(row, row + c) - row);
    }
    pred.probs = Tensor({n, c}, std::move(probs));
    return pred;
}

ClassifierModel train_cscacnn(const dataset::FeatureMatrix& data, ClassifierConfig cfg,
                              std::vector<TrainLogEntry>* log) {
    if (cfg.feature_dim <= 0) cfg.feature_dim = data.cols();
    if (cfg.feature_dim != data.cols())
        throw DimensionError("classifier: config feature_dim does not match data width");
    std::vector<long> counts(cfg.num_classes, 0);
    for (int l : data.labels) {
        if (l < 0 || l >= cfg.num_classes)
            throw ContractError("classifier: label " + std::to_string(l) + " out of range");
        counts[l] += 1;
    }
    for (int c = 0; c < cfg.num_classes; ++c)
        if (counts[c] == 0)
            throw ContractError("classifier: class " + std::to_string(c) +
                                " has no training samples");

    ClassifierModel model = ClassifierModel::init(cfg);
    if (cfg.cost_scheme == "inverse-frequency")
        model.cost = cost_weights(counts, CostScheme::InverseFrequency);
    else if (cfg.cost_scheme == "uniform")
        model.cost = cost_weights(counts, CostScheme::Uniform);
    else if (cfg.cost_scheme == "custom")
        model.cost = cost_weights(counts, CostScheme::Custom, cfg.cost_custom);
    else
        throw ConfigError("classifier: unknown cost scheme '" + cfg.cost_scheme + "'");

    auto rng = make_rng(cfg.seed, "classifier-train");

    // stratified train/val split
    std::vector<int> train_idx, val_idx;
    {
        std::vector<std::vector<int>> by_class(cfg.num_classes);
        for (int i = 0; i < data.rows(); ++i) by_class[data.labels[i]].push_back(i);
        for (auto& rows : by_class) {
            std::shuffle(rows.begin(), rows.end(), rng);
            const int n_val = static_cast<int>(rows.size() * cfg.val_fraction);
            for (std::size_t i = 0; i < rows.size(); ++i)
                (static_cast<int>(i) < n_val ? val_idx : train_idx).push_back(rows[i]);
        }
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(val_idx.begin(), val_idx.end());
    }

    auto params = model.params();
    auto state = ad::AdamState::init(params);
    const int d = cfg.feature_dim;

    auto batch_of = [&](const std::vector<int>& idx, int start, int m, Tensor& x, Tensor& y) {
        std::vector<double> xd(static_cast<std::size_t>(m) * d);
        std::vector<double> yd(static_cast<std::size_t>(m) * cfg.num_classes, 0.0);
        for (int i = 0; i < m; ++i) {
            const int row = idx[start + i];
            std::copy_n(data.row(row), d, xd.begin() + static_cast<std::size_t>(i) * d);
            yd[static_cast<std::size_t>(i) * cfg.num_classes + data.labels[row]] = 1.0;
        }
        x = Tensor({m, d}, std::move(xd));
        y = Tensor({m, cfg.num_classes}, std::move(yd));
    };

    auto val_f1 = [&]() {
        if (val_idx.empty()) return 0.0;
        std::vector<double> xd(val_idx.size() * static_cast<std::size_t>(d));
        std::vector<int> yt(val_idx.size());
        for (std::size_t i = 0; i < val_idx.size(); ++i) {
            std::copy_n(data.row(val_idx[i]), d, xd.begin() + i * d);
            yt[i] = data.labels[val_idx[i]];
        }
        Tensor xv({static_cast<int>(val_idx.size()), d}, std::move(xd));
        auto pred = predict(model, xv);
        return metrics::weighted_prf(yt, pred.labels, cfg.num_classes).weighted_f1;
    };

    std::vector<std::vector<double>> best_params;
    double best_f1 = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    int stall = 0;
    std::vector<int> order = train_idx;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < static_cast<int>(order.size()); start += cfg.batch_size) {
            const int m = std::min<int>(cfg.batch_size, static_cast<int>(order.size()) - start);
            Tensor x, y;
            batch_of(order, start, m, x, y);
            Tensor probs = ad::softmax(model.forward(x, rng, true));
            Tensor loss = cs_ce_loss(probs, y, model.cost);
            if (!ad::all_finite(loss))
                throw TrainingError("classifier: loss diverged at epoch " +
                                        std::to_string(epoch),
                                    epoch - 1);
            ad::zero_grads(params);
            ad::backward(loss);
            ad::adam_step(params, state, cfg.lr);
            sum_loss += loss.item();
            ++batches;
        }
        const double f1 = val_f1();
        if (log) log->push_back({batches ? sum_loss / batches : 0.0, f1});
        if (!val_idx.empty()) {
            const double epoch_loss = batches ? sum_loss / batches : 0.0;
            const bool improved = f1 > best_f1 + 1e-12;
            // on a validation-F1 tie, prefer the lower-training-loss epoch so
            // the snapshot keeps refining after validation saturates
            if (improved || (f1 >= best_f1 - 1e-12 && epoch_loss < best_loss)) {
                best_f1 = std::max(best_f1, f1);
                best_loss = epoch_loss;
                best_params.clear();
                for (auto& p : params) best_params.push_back(p.data());
            }
            if (improved) {
                stall = 0;
            } else if (++stall >= cfg.patience) {
                break;
            }
        }
    }
    if (!best_params.empty())
        for (std::size_t i = 0; i < params.size(); ++i) params[i].data() = best_params[i];
    ad::zero_grads(params);
    return model;
}

}  // namespace csagc::classifier
