#include "csagc/pipeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csagc/errors.hpp"
#include "csagc/explain.hpp"
#include "csagc/matrix_io.hpp"
#include "csagc/metrics.hpp"
#include "csagc/rng.hpp"

namespace csagc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kStageOrder = {"preprocess", "gan-train", "generate",
                                              "clf-train",  "evaluate", "explain",
                                              "report"};

json RunConfig::to_json() const {
    return {{"train_path", train_path},
            {"test_path", test_path},
            {"out_dir", out_dir},
            {"seed", seed},
            {"balance", balance},
            {"task", task},
            {"plan", plan},
            {"smote_k", smote_k},
            {"gan", gan.to_json()},
            {"classifier", clf.to_json()},
            {"explain_method", explain_method},
            {"explain_sample", explain_sample},
            {"background_size", background_size},
            {"lime_perturb", lime_perturb},
            {"shap_samples", shap_samples},
            {"artifact_overrides", artifact_overrides}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    c.train_path = j.value("train_path", c.train_path);
    c.test_path = j.value("test_path", c.test_path);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    c.balance = j.value("balance", c.balance);
    c.task = j.value("task", c.task);
    c.plan = j.value("plan", c.plan);
    c.smote_k = j.value("smote_k", c.smote_k);
    if (j.contains("gan")) c.gan = balance::GanConfig::from_json(j.at("gan"));
    if (j.contains("classifier"))
        c.clf = classifier::ClassifierConfig::from_json(j.at("classifier"));
    c.explain_method = j.value("explain_method", c.explain_method);
    c.explain_sample = j.value("explain_sample", c.explain_sample);
    c.background_size = j.value("background_size", c.background_size);
    c.lime_perturb = j.value("lime_perturb", c.lime_perturb);
    c.shap_samples = j.value("shap_samples", c.shap_samples);
    c.artifact_overrides =
        j.value("artifact_overrides", std::map<std::string, std::string>{});
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return from_json(j);
}

void RunConfig::validate() const {
    std::vector<std::string> bad;
    if (balance != "sc-cgan" && balance != "ros" && balance != "smote" && balance != "none")
        bad.push_back("balance='" + balance + "' (want sc-cgan|ros|smote|none)");
    if (task != "five" && task != "binary")
        bad.push_back("task='" + task + "' (want five|binary)");
    if (explain_method != "shap" && explain_method != "lime")
        bad.push_back("explain_method='" + explain_method + "' (want shap|lime)");
    if (smote_k < 1) bad.push_back("smote_k must be >= 1");
    if (background_size < 1) bad.push_back("background_size must be >= 1");
    if (lime_perturb < 100) bad.push_back("lime_perturb must be >= 100");
    if (explain_sample < 0) bad.push_back("explain_sample must be >= 0");
    if (out_dir.empty()) bad.push_back("out_dir must be set");
    if (!bad.empty()) {
        std::string msg = "invalid config:";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw ConfigError(msg);
    }
}

std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = fnv1a(cfg.to_json().dump());
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

std::string artifact_path(const RunConfig& cfg, const std::string& name) {
    auto it = cfg.artifact_overrides.find(name);
    if (it != cfg.artifact_overrides.end()) return it->second;
    return (fs::path(cfg.out_dir) / name).string();
}

namespace {

void require_artifact(const RunConfig& cfg, const std::string& name,
                      const std::string& stage, const std::string& producer) {
    const std::string path = artifact_path(cfg, name);
    if (!fs::exists(path))
        throw ConfigError("stage '" + stage + "' is missing its input " + path +
                          "; run stage '" + producer + "' first");
}

void require_input(const std::string& path, const std::string& stage,
                   const std::string& flag) {
    if (path.empty())
        throw ConfigError("stage '" + stage + "' requires " + flag + " to be set");
    if (!fs::exists(path))
        throw ConfigError("stage '" + stage + "': input file " + path + " does not exist");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

void write_json(const std::string& path, json doc, const RunConfig& cfg) {
    doc["config_hash"] = config_hash(cfg);
    write_text(path, doc.dump(2) + "\n");
}

json stats_json(const dataset::ClassStats& s) {
    json counts = json::object(), ci = json::object();
    for (int c = 0; c < dataset::kNumClasses; ++c) {
        counts[dataset::kClassNames[c]] = s.counts[c];
        ci[dataset::kClassNames[c]] = s.ci_ratio[c];
    }
    return {{"counts", counts}, {"ci_ratio", ci}, {"total", s.total()}};
}

dataset::FeatureMatrix with_binary_labels(dataset::FeatureMatrix fm) {
    fm.labels = dataset::binary_labels(fm.labels);
    return fm;
}

std::vector<long> resolve_plan(const RunConfig& cfg, const std::vector<int>& labels) {
    if (cfg.plan == "auto")
        return balance::make_balance_plan(dataset::class_stats(labels));
    std::ifstream in(cfg.plan);
    if (!in) throw ConfigError("cannot open balance plan file " + cfg.plan);
    json j;
    in >> j;
    if (!j.is_array()) throw ParseError(cfg.plan + ": expected a JSON array of counts");
    return j.get<std::vector<long>>();
}

// One model evaluation batch -> probability of `target_class`.
explain::ModelFn class_prob_fn(const classifier::ClassifierModel& model, int target_class) {
    return [&model, target_class](const std::vector<std::vector<double>>& rows) {
        const int n = static_cast<int>(rows.size());
        const int d = model.config.feature_dim;
        ad::Tensor x = ad::Tensor::zeros({n, d}, false);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(rows[i].size()) != d)
                throw DimensionError("explain: row width does not match the model");
            std::copy(rows[i].begin(), rows[i].end(), x.data().begin() + std::size_t(i) * d);
        }
        classifier::Prediction p = classifier::predict(model, x);
        std::vector<double> out(n);
        const int c = p.probs.shape()[1];
        for (int i = 0; i < n; ++i) out[i] = p.probs.data()[std::size_t(i) * c + target_class];
        return out;
    };
}

// Numeric columns take the background mean; one-hot blocks take the modal
// category so masked groups stay valid indicator blocks.
std::vector<double> build_reference(const dataset::FeatureMatrix& bg,
                                    const std::vector<explain::FeatureGroup>& groups) {
    std::vector<double> ref(bg.cols(), 0.0);
    std::vector<double> mean(bg.cols(), 0.0);
    for (int i = 0; i < bg.rows(); ++i)
        for (int c = 0; c < bg.cols(); ++c) mean[c] += bg.row(i)[c];
    for (double& m : mean) m /= std::max(1, bg.rows());
    for (const auto& g : groups) {
        if (g.columns.size() == 1) {
            ref[g.columns[0]] = mean[g.columns[0]];
        } else {
            int best = g.columns[0];
            for (int c : g.columns)
                if (mean[c] > mean[best]) best = c;
            for (int c : g.columns) ref[c] = 0.0;
            ref[best] = 1.0;
        }
    }
    return ref;
}

dataset::FeatureMatrix stratified_background(const dataset::FeatureMatrix& train, int size,
                                             std::uint64_t seed) {
    std::vector<std::vector<int>> by_class;
    for (int i = 0; i < train.rows(); ++i) {
        const int l = train.labels[i];
        if (l >= static_cast<int>(by_class.size())) by_class.resize(l + 1);
        by_class[l].push_back(i);
    }
    auto rng = make_rng(seed, "explain-background");
    for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);
    std::vector<int> picked;
    for (std::size_t round = 0; static_cast<int>(picked.size()) < size; ++round) {
        bool any = false;
        for (const auto& v : by_class) {
            if (round < v.size() && static_cast<int>(picked.size()) < size) {
                picked.push_back(v[round]);
                any = true;
            }
        }
        if (!any) break;
    }
    std::sort(picked.begin(), picked.end());
    dataset::FeatureMatrix bg;
    bg.values = ad::Tensor::zeros({static_cast<int>(picked.size()), train.cols()}, false);
    bg.feature_names = train.feature_names;
    bg.mu = train.mu;
    bg.sigma = train.sigma;
    for (std::size_t i = 0; i < picked.size(); ++i) {
        std::copy(train.row(picked[i]), train.row(picked[i]) + train.cols(),
                  bg.values.data().begin() + i * train.cols());
        bg.labels.push_back(train.labels[picked[i]]);
    }
    return bg;
}

}  // namespace

void stage_preprocess(const RunConfig& cfg) {
    require_input(cfg.train_path, "preprocess", "--train");
    require_input(cfg.test_path, "preprocess", "--test");
    dataset::RecordSet train = dataset::load_nslkdd(cfg.train_path, "train");
    dataset::RecordSet test = dataset::load_nslkdd(cfg.test_path, "test");
    dataset::Encoding enc = dataset::fit_encoding(train);
    dataset::FeatureMatrix train_fm = dataset::transform(train, enc);
    dataset::FeatureMatrix test_fm = dataset::transform(test, enc);

    const json extra = {{"config_hash", config_hash(cfg)}};
    io::save_matrix(artifact_path(cfg, "train.matrix"), train_fm, extra);
    io::save_matrix(artifact_path(cfg, "test.matrix"), test_fm, extra);

    dataset::ClassStats train_stats = dataset::class_stats(train);
    dataset::ClassStats test_stats = dataset::class_stats(test);
    dataset::ClassStats combined;
    for (int c = 0; c < dataset::kNumClasses; ++c)
        combined.counts[c] = train_stats.counts[c] + test_stats.counts[c];
    const long maj = combined.counts[combined.majority_class()];
    for (int c = 0; c < dataset::kNumClasses; ++c)
        combined.ci_ratio[c] =
            combined.counts[c] > 0 ? double(maj) / double(combined.counts[c]) : 0.0;
    write_json(artifact_path(cfg, "stats.json"),
               {{"kind", "dataset-stats"},
                {"train", stats_json(train_stats)},
                {"test", stats_json(test_stats)},
                {"combined", stats_json(combined)},
                {"encoded_dim", enc.width()},
                {"unseen_test_categories", test_fm.unseen_category_count},
                {"warnings", enc.warnings}},
               cfg);
}

void stage_gan_train(const RunConfig& cfg) {
    require_artifact(cfg, "train.matrix", "gan-train", "preprocess");
    dataset::FeatureMatrix train = io::load_matrix(artifact_path(cfg, "train.matrix"));
    balance::GanConfig gc = cfg.gan;
    gc.feature_dim = train.cols();
    gc.seed = split_seed(cfg.seed, "stage-gan");
    std::vector<balance::EpochLog> log;
    balance::GanModel model = balance::train_scgan(train, gc, &log);
    model.save(artifact_path(cfg, "gan.ckpt"));
    json epochs = json::array();
    for (const auto& e : log) epochs.push_back({{"loss_d", e.loss_d}, {"loss_g", e.loss_g}});
    write_json(artifact_path(cfg, "gan_log.json"),
               {{"kind", "gan-train-log"}, {"config", gc.to_json()}, {"epochs", epochs}}, cfg);
}

void stage_generate(const RunConfig& cfg) {
    require_artifact(cfg, "train.matrix", "generate", "preprocess");
    dataset::FeatureMatrix train = io::load_matrix(artifact_path(cfg, "train.matrix"));
    auto rng = make_rng(split_seed(cfg.seed, "stage-generate"), "augment");
    dataset::FeatureMatrix augmented;
    std::vector<long> plan;
    std::vector<std::string> warnings;
    if (cfg.balance == "none") {
        augmented = train;
        plan.assign(dataset::kNumClasses, 0);
    } else {
        plan = resolve_plan(cfg, train.labels);
        if (cfg.balance == "sc-cgan") {
            require_artifact(cfg, "gan.ckpt", "generate", "gan-train");
            balance::GanModel gan = balance::GanModel::load(artifact_path(cfg, "gan.ckpt"));
            augmented = balance::augment_with_gan(train, gan, plan, rng);
        } else if (cfg.balance == "ros") {
            augmented = balance::random_oversample(train, plan, rng);
        } else {
            augmented = balance::smote(train, plan, cfg.smote_k, rng, &warnings);
        }
    }
    io::save_matrix(artifact_path(cfg, "augmented.matrix"),
                    augmented,
                    {{"config_hash", config_hash(cfg)},
                     {"balance", cfg.balance},
                     {"plan", plan},
                     {"original_rows", train.rows()},
                     {"warnings", warnings}});
}

void stage_clf_train(const RunConfig& cfg) {
    require_artifact(cfg, "augmented.matrix", "clf-train", "generate");
    dataset::FeatureMatrix data = io::load_matrix(artifact_path(cfg, "augmented.matrix"));
    if (cfg.task == "binary") data = with_binary_labels(data);
    classifier::ClassifierConfig cc = cfg.clf;
    cc.feature_dim = data.cols();
    cc.num_classes = cfg.task == "binary" ? 2 : dataset::kNumClasses;
    cc.seed = split_seed(cfg.seed, "stage-clf");
    std::vector<classifier::TrainLogEntry> log;
    classifier::ClassifierModel model = classifier::train_cscacnn(data, cc, &log);
    model.save(artifact_path(cfg, "classifier.ckpt"));
    json epochs = json::array();
    for (const auto& e : log)
        epochs.push_back({{"train_loss", e.train_loss}, {"val_weighted_f1", e.val_weighted_f1}});
    write_json(artifact_path(cfg, "clf_log.json"),
               {{"kind", "clf-train-log"},
                {"config", model.config.to_json()},
                {"cost_weights", model.cost},
                {"complexity", model.complexity().to_json()},
                {"epochs", epochs}},
               cfg);
}

void stage_evaluate(const RunConfig& cfg) {
    require_artifact(cfg, "classifier.ckpt", "evaluate", "clf-train");
    require_artifact(cfg, "test.matrix", "evaluate", "preprocess");
    classifier::ClassifierModel model =
        classifier::ClassifierModel::load(artifact_path(cfg, "classifier.ckpt"));
    dataset::FeatureMatrix test = io::load_matrix(artifact_path(cfg, "test.matrix"));
    if (cfg.task == "binary") test = with_binary_labels(test);
    classifier::Prediction pred = classifier::predict(model, test.values);
    metrics::EvalReport rep =
        metrics::weighted_prf(test.labels, pred.labels, model.config.num_classes);
    write_json(artifact_path(cfg, "eval.json"),
               {{"kind", "evaluation"},
                {"task", cfg.task},
                {"report", rep.to_json()},
                {"complexity", model.complexity().to_json()}},
               cfg);
    write_text(artifact_path(cfg, "eval.txt"),
               rep.format_table(cfg.task == "binary" ? "binary" : "five-class"));
}

void stage_explain(const RunConfig& cfg) {
    require_artifact(cfg, "classifier.ckpt", "explain", "clf-train");
    require_artifact(cfg, "train.matrix", "explain", "preprocess");
    require_artifact(cfg, "test.matrix", "explain", "preprocess");
    classifier::ClassifierModel model =
        classifier::ClassifierModel::load(artifact_path(cfg, "classifier.ckpt"));
    dataset::FeatureMatrix train = io::load_matrix(artifact_path(cfg, "train.matrix"));
    dataset::FeatureMatrix test = io::load_matrix(artifact_path(cfg, "test.matrix"));
    if (cfg.explain_sample >= test.rows())
        throw ConfigError("explain: sample index " + std::to_string(cfg.explain_sample) +
                          " out of range for test set with " + std::to_string(test.rows()) +
                          " rows");
    std::vector<double> x(test.row(cfg.explain_sample),
                          test.row(cfg.explain_sample) + test.cols());

    std::vector<explain::FeatureGroup> groups;
    try {
        groups = explain::onehot_groups(test.feature_names, x);
    } catch (const ContractError&) {
        groups = explain::singleton_groups(test.cols(), test.feature_names);
    }

    dataset::FeatureMatrix bg = stratified_background(
        train, std::min(cfg.background_size, train.rows()), split_seed(cfg.seed, "stage-explain"));

    classifier::Prediction p0 = classifier::predict(
        model, [&] {
            ad::Tensor t = ad::Tensor::zeros({1, test.cols()}, false);
            std::copy(x.begin(), x.end(), t.data().begin());
            return t;
        }());
    const int target = p0.labels[0];
    explain::ModelFn fn = class_prob_fn(model, target);

    explain::ExplanationReport rep;
    if (cfg.explain_method == "lime") {
        explain::LimeConfig lc;
        lc.n_perturb = cfg.lime_perturb;
        lc.seed = split_seed(cfg.seed, "stage-explain");
        rep = explain::lime_explain(fn, x, groups, build_reference(bg, groups), lc);
    } else {
        explain::ShapConfig sc;
        const int m = static_cast<int>(groups.size());
        sc.exact = m <= 12 && cfg.shap_samples == 0;
        sc.n_samples = sc.exact ? 0 : std::max(cfg.shap_samples, 2 * m + 2);
        sc.seed = split_seed(cfg.seed, "stage-explain");
        std::vector<std::vector<double>> bg_rows;
        for (int i = 0; i < bg.rows(); ++i)
            bg_rows.emplace_back(bg.row(i), bg.row(i) + bg.cols());
        rep = explain::kernel_shap(fn, x, groups, bg_rows, sc);
    }
    rep.sample_id = "test:" + std::to_string(cfg.explain_sample);
    rep.predicted_class = target;
    rep.predicted_prob = p0.probs.data()[target];
    write_json(artifact_path(cfg, "explain.json"), rep.to_json(), cfg);

    json plot = explain::force_plot_data({rep}, "single");
    write_json(artifact_path(cfg, "force_plot.json"), plot, cfg);
    write_text(artifact_path(cfg, "force_plot.svg"), explain::force_plot_svg(plot));
}

void stage_report(const RunConfig& cfg) {
    json report = {{"kind", "run-report"}, {"config", cfg.to_json()}};
    for (const char* name : {"stats.json", "gan_log.json", "clf_log.json", "eval.json",
                             "explain.json"}) {
        const std::string path = artifact_path(cfg, name);
        if (!fs::exists(path)) continue;
        std::ifstream in(path);
        json j;
        in >> j;
        std::string key = name;
        key.erase(key.find(".json"));
        report[key] = j;
    }

    // 2-D PCA projection of real vs. generated rows as the offline
    // visualization artifact.
    const std::string aug_path = artifact_path(cfg, "augmented.matrix");
    const std::string train_path = artifact_path(cfg, "train.matrix");
    if (fs::exists(aug_path) && fs::exists(train_path)) {
        dataset::FeatureMatrix aug = io::load_matrix(aug_path);
        json hdr = io::load_matrix_header(aug_path);
        const int orig = hdr.value("original_rows", aug.rows());
        const int cap = 1000;
        std::vector<std::pair<int, const char*>> rows;  // index, source
        auto rng = make_rng(split_seed(cfg.seed, "stage-report"), "pca-sample");
        std::vector<int> real_idx, gen_idx;
        for (int i = 0; i < orig; ++i) real_idx.push_back(i);
        for (int i = orig; i < aug.rows(); ++i) gen_idx.push_back(i);
        std::shuffle(real_idx.begin(), real_idx.end(), rng);
        std::shuffle(gen_idx.begin(), gen_idx.end(), rng);
        real_idx.resize(std::min<std::size_t>(real_idx.size(), cap));
        gen_idx.resize(std::min<std::size_t>(gen_idx.size(), cap));
        for (int i : real_idx) rows.push_back({i, "real"});
        for (int i : gen_idx) rows.push_back({i, "generated"});

        const int n = static_cast<int>(rows.size());
        const int d = aug.cols();
        Eigen::MatrixXd m(n, d);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < d; ++c) m(i, c) = aug.row(rows[i].first)[c];
        Eigen::RowVectorXd mean = m.colwise().mean();
        m.rowwise() -= mean;
        Eigen::MatrixXd cov = m.transpose() * m / std::max(1, n - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        Eigen::MatrixXd basis = es.eigenvectors().rightCols(std::min(2, d));
        Eigen::MatrixXd proj = m * basis;
        json points = json::array();
        for (int i = 0; i < n; ++i)
            points.push_back({{"x", proj(i, proj.cols() - 1)},
                              {"y", proj.cols() > 1 ? proj(i, 0) : 0.0},
                              {"label", aug.labels[rows[i].first]},
                              {"source", rows[i].second}});
        write_json(artifact_path(cfg, "pca_projection.json"),
                   {{"kind", "pca-projection"}, {"points", points}}, cfg);
        report["pca_projection"] = artifact_path(cfg, "pca_projection.json");
    }
    write_json(artifact_path(cfg, "report.json"), report, cfg);
}

void run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages) {
    cfg.validate();
    std::vector<std::string> bad;
    for (const auto& s : stages)
        if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end())
            bad.push_back(s);
    if (!bad.empty()) {
        std::string msg = "unknown stage(s):";
        for (const auto& s : bad) msg += " '" + s + "'";
        throw ConfigError(msg);
    }
    fs::create_directories(cfg.out_dir);
    write_text(artifact_path(cfg, "resolved_config.json"),
               json({{"config", cfg.to_json()}, {"config_hash", config_hash(cfg)}}).dump(2) +
                   "\n");
    for (const auto& name : kStageOrder) {
        if (std::find(stages.begin(), stages.end(), name) == stages.end()) continue;
        if (name == "preprocess") stage_preprocess(cfg);
        else if (name == "gan-train") stage_gan_train(cfg);
        else if (name == "generate") stage_generate(cfg);
        else if (name == "clf-train") stage_clf_train(cfg);
        else if (name == "evaluate") stage_evaluate(cfg);
        else if (name == "explain") stage_explain(cfg);
        else stage_report(cfg);
    }
}

}  // namespace csagc::pipeline
