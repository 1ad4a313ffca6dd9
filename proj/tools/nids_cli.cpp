// nids: command-line front end for the intrusion-detection pipeline.
//
// Subcommands map one-to-one onto pipeline stages; `run` executes several
// stages from a single config file. NIDS_SEED and NIDS_OUT environment
// variables override the seed and output directory.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csagc/errors.hpp"
#include "csagc/pipeline.hpp"

namespace pl = csagc::pipeline;

namespace {

void apply_env_overrides(pl::RunConfig& cfg) {
    if (const char* s = std::getenv("NIDS_SEED")) cfg.seed = std::stoull(s);
    if (const char* o = std::getenv("NIDS_OUT")) cfg.out_dir = o;
}

int execute(pl::RunConfig cfg, const std::vector<std::string>& stages) {
    apply_env_overrides(cfg);
    try {
        pl::run_pipeline(cfg, stages);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"network intrusion detection pipeline"};
    app.require_subcommand(1);

    pl::RunConfig cfg;
    app.add_option("--seed", cfg.seed, "master RNG seed")->capture_default_str();
    app.add_option("--out", cfg.out_dir, "artifact directory")->capture_default_str();

    auto* pre = app.add_subcommand("preprocess", "encode raw NSL-KDD splits");
    pre->add_option("--train", cfg.train_path, "raw training split (KDDTrain+)")->required();
    pre->add_option("--test", cfg.test_path, "raw test split (KDDTest+)")->required();

    auto* gan = app.add_subcommand("gan-train", "train the conditional GAN");
    std::string data_path;
    gan->add_option("--data", data_path, "preprocessed training matrix");
    gan->add_option("--epochs", cfg.gan.epochs, "training epochs")->capture_default_str();
    gan->add_option("--batch", cfg.gan.batch_size, "batch size")->capture_default_str();

    auto* generate = app.add_subcommand("generate", "synthesize minority-class rows");
    std::string model_path;
    generate->add_option("--model", model_path, "GAN checkpoint");
    generate->add_option("--data", data_path, "preprocessed training matrix");
    generate->add_option("--plan", cfg.plan, "'auto' or a JSON count-vector file")
        ->capture_default_str();
    generate->add_option("--balance", cfg.balance, "sc-cgan|ros|smote|none")
        ->capture_default_str();
    generate->add_option("--smote-k", cfg.smote_k, "SMOTE neighbor count")
        ->capture_default_str();

    auto* clf = app.add_subcommand("clf-train", "train the CNN classifier");
    std::string augmented_path;
    clf->add_option("--data", data_path, "preprocessed training matrix");
    clf->add_option("--augmented", augmented_path, "balanced training matrix");
    clf->add_option("--costs", cfg.clf.cost_scheme,
                    "inverse-frequency|uniform|<json weight file>")
        ->capture_default_str();
    clf->add_option("--task", cfg.task, "five|binary")->capture_default_str();
    clf->add_option("--epochs", cfg.clf.max_epochs, "max training epochs")
        ->capture_default_str();
    clf->add_flag("--no-cam,!--cam", cfg.clf.use_cam, "toggle channel attention")
        ->capture_default_str();

    auto* eval = app.add_subcommand("evaluate", "score the classifier on the test split");
    std::string report_path;
    eval->add_option("--model", model_path, "classifier checkpoint");
    eval->add_option("--test", data_path, "preprocessed test matrix");
    eval->add_option("--report", report_path, "(accepted for compatibility; reports "
                                              "are written into the artifact directory)");
    eval->add_option("--task", cfg.task, "five|binary")->capture_default_str();

    auto* explain = app.add_subcommand("explain", "explain one test prediction");
    explain->add_option("--model", model_path, "classifier checkpoint");
    explain->add_option("--method", cfg.explain_method, "lime|shap")->capture_default_str();
    explain->add_option("--sample", cfg.explain_sample, "test-set row index")
        ->capture_default_str();
    explain->add_option("--background", cfg.background_size, "background rows")
        ->capture_default_str();
    explain->add_option("--perturb", cfg.lime_perturb, "LIME perturbation count")
        ->capture_default_str();

    auto* report = app.add_subcommand("report", "aggregate artifacts into one report");

    auto* run = app.add_subcommand("run", "run several stages from a config file");
    std::string config_path, stages_arg = "all";
    run->add_option("--config", config_path, "JSON run configuration");
    run->add_option("--stages", stages_arg, "comma-separated stage list or 'all'")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (!config_path.empty()) {
            cfg = pl::RunConfig::load(config_path);
            // command-line seed/out take precedence over the file
            if (app.count("--seed")) cfg.seed = std::stoull(app["--seed"]->as<std::string>());
            if (app.count("--out")) cfg.out_dir = app["--out"]->as<std::string>();
        }
        std::vector<std::string> stages;
        if (stages_arg == "all") {
            stages = pl::kStageOrder;
            if (cfg.balance != "sc-cgan")
                stages.erase(std::find(stages.begin(), stages.end(), "gan-train"));
        } else {
            std::stringstream ss(stages_arg);
            std::string s;
            while (std::getline(ss, s, ','))
                if (!s.empty()) stages.push_back(s);
        }
        return execute(cfg, stages);
    }

    // per-stage flags that point at files outside --out
    auto override_artifact = [&](const std::string& name, const std::string& path) {
        if (!path.empty()) cfg.artifact_overrides[name] = path;
    };
    std::vector<std::string> stages;
    if (pre->parsed()) {
        stages = {"preprocess"};
    } else if (gan->parsed()) {
        override_artifact("train.matrix", data_path);
        stages = {"gan-train"};
    } else if (generate->parsed()) {
        override_artifact("train.matrix", data_path);
        override_artifact("gan.ckpt", model_path);
        stages = {"generate"};
    } else if (clf->parsed()) {
        override_artifact("train.matrix", data_path);
        override_artifact("augmented.matrix", augmented_path);
        if (cfg.clf.cost_scheme != "inverse-frequency" && cfg.clf.cost_scheme != "uniform") {
            // a file path: load custom per-class weights
            std::ifstream in(cfg.clf.cost_scheme);
            if (!in) {
                std::cerr << "error: cannot open cost file " << cfg.clf.cost_scheme << "\n";
                return 1;
            }
            nlohmann::json j;
            in >> j;
            cfg.clf.cost_custom = j.get<std::vector<double>>();
            cfg.clf.cost_scheme = "custom";
        }
        stages = {"clf-train"};
    } else if (eval->parsed()) {
        override_artifact("classifier.ckpt", model_path);
        override_artifact("test.matrix", data_path);
        stages = {"evaluate"};
    } else if (explain->parsed()) {
        override_artifact("classifier.ckpt", model_path);
        stages = {"explain"};
    } else if (report->parsed()) {
        stages = {"report"};
    }
    return execute(cfg, stages);
}
