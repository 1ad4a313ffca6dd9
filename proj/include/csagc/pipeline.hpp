#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "csagc/balance.hpp"
#include "csagc/classifier.hpp"

namespace csagc::pipeline {

// Fully resolved run configuration. Unset fields keep the library defaults;
// the resolved snapshot (plus its hash) is written next to every artifact so
// a rerun with the same config and seed is byte-identical per stage.
struct RunConfig {
    std::string train_path;
    std::string test_path;
    std::string out_dir = "artifacts";
    std::uint64_t seed = 0;

    std::string balance = "sc-cgan";  // sc-cgan | ros | smote | none
    std::string task = "five";        // five | binary
    std::string plan = "auto";        // auto | path to a JSON count vector
    int smote_k = 5;

    balance::GanConfig gan;            // feature_dim resolved from the data
    classifier::ClassifierConfig clf;  // feature_dim/num_classes resolved

    // artifact name (e.g. "train.matrix") -> explicit path, for CLI flags
    // that point outside out_dir
    std::map<std::string, std::string> artifact_overrides;

    std::string explain_method = "shap";  // shap | lime
    int explain_sample = 0;               // test-set row index
    int background_size = 100;            // stratified training rows
    int lime_perturb = 5000;
    int shap_samples = 0;  // 0: exact when group count allows, else 2*M+2

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    void validate() const;  // lists all offending keys in one error
};

// Stable hash of the resolved config, embedded in every artifact.
std::string config_hash(const RunConfig& cfg);

extern const std::vector<std::string> kStageOrder;
// preprocess, gan-train, generate, clf-train, evaluate, explain, report

void stage_preprocess(const RunConfig& cfg);
void stage_gan_train(const RunConfig& cfg);
void stage_generate(const RunConfig& cfg);
void stage_clf_train(const RunConfig& cfg);
void stage_evaluate(const RunConfig& cfg);
void stage_explain(const RunConfig& cfg);
void stage_report(const RunConfig& cfg);

// Runs the requested stages in pipeline order. Unknown stage names or invalid
// config fail before any artifact is written; a stage whose upstream artifact
// is missing raises an error naming the file and the stage that produces it.
void run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages);

// Artifact paths within cfg.out_dir.
std::string artifact_path(const RunConfig& cfg, const std::string& name);

}  // namespace csagc::pipeline
