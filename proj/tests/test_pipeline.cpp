#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "csagc/errors.hpp"
#include "csagc/matrix_io.hpp"
#include "csagc/pipeline.hpp"
#include "support/fixture.hpp"

using namespace csagc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small fixture + desk-scale model settings shared by the pipeline tests.
pipeline::RunConfig make_cfg(const std::string& dir) {
    fs::create_directories(dir);
    pipeline::RunConfig cfg;
    cfg.train_path = dir + "/train.csv";
    cfg.test_path = dir + "/test.csv";
    cfg.out_dir = dir + "/artifacts";
    cfg.seed = 42;
    if (!fs::exists(cfg.train_path)) {
        fixture::write_nslkdd(cfg.train_path, fixture::scaled_counts(fixture::kTrainCounts, 400),
                              101, true);
        fixture::write_nslkdd(cfg.test_path, fixture::scaled_counts(fixture::kTestCounts, 150),
                              202, false);
    }

    cfg.gan.noise_dim = 8;
    cfg.gan.gen_hidden = 16;
    cfg.gan.attention_dim = 8;
    cfg.gan.disc_hidden = 12;
    cfg.gan.disc_channels = 8;
    cfg.gan.disc_fusion_len = 16;
    cfg.gan.batch_size = 64;
    cfg.gan.epochs = 2;

    cfg.clf.channels = 8;
    cfg.clf.conv_blocks = 2;
    cfg.clf.squeeze_ratio = 4;
    cfg.clf.dense_hidden = 16;
    cfg.clf.batch_size = 64;
    cfg.clf.max_epochs = 3;
    cfg.clf.patience = 3;

    cfg.background_size = 20;
    cfg.explain_method = "lime";
    cfg.lime_perturb = 300;
    return cfg;
}

}  // namespace

TEST_CASE("pipeline runs end to end on a small dataset") {
    const std::string dir = (fs::temp_directory_path() / "pipeline_e2e").string();
    fs::remove_all(dir);
    pipeline::RunConfig cfg = make_cfg(dir);

    pipeline::run_pipeline(cfg, pipeline::kStageOrder);

    for (const char* name :
         {"train.matrix", "test.matrix", "stats.json", "gan.ckpt", "gan_log.json",
          "augmented.matrix", "classifier.ckpt", "clf_log.json", "eval.json", "eval.txt",
          "explain.json", "force_plot.json", "force_plot.svg", "pca_projection.json",
          "report.json", "resolved_config.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(pipeline::artifact_path(cfg, name)));
    }

    nlohmann::json eval = nlohmann::json::parse(slurp(pipeline::artifact_path(cfg, "eval.json")));
    CHECK(eval.at("kind") == "evaluation");
    const double acc = eval.at("report").at("accuracy").get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(eval.at("report").at("per_class").size() == 5);
    CHECK(eval.at("complexity").at("params").get<long>() > 0);
    CHECK(eval.at("config_hash") == pipeline::config_hash(cfg));

    nlohmann::json ex = nlohmann::json::parse(slurp(pipeline::artifact_path(cfg, "explain.json")));
    CHECK(ex.at("method") == "lime");
    CHECK(!ex.at("attributions").empty());
    CHECK(ex.at("predicted_class").get<int>() >= 0);

    nlohmann::json aug_hdr = io::load_matrix_header(pipeline::artifact_path(cfg, "augmented.matrix"));
    CHECK(aug_hdr.at("balance") == "sc-cgan");
    CHECK(aug_hdr.at("plan").size() == 5);
    CHECK(aug_hdr.at("original_rows").get<int>() > 0);

    nlohmann::json report = nlohmann::json::parse(slurp(pipeline::artifact_path(cfg, "report.json")));
    CHECK(report.at("kind") == "run-report");
    CHECK(report.contains("eval"));
    CHECK(report.contains("stats"));

    nlohmann::json pca =
        nlohmann::json::parse(slurp(pipeline::artifact_path(cfg, "pca_projection.json")));
    CHECK(pca.at("kind") == "pca-projection");
    bool has_real = false, has_generated = false;
    for (const auto& p : pca.at("points")) {
        if (p.at("source") == "real") has_real = true;
        if (p.at("source") == "generated") has_generated = true;
    }
    CHECK(has_real);
    CHECK(has_generated);
}

TEST_CASE("re-running a stage reproduces its artifacts byte for byte") {
    const std::string dir = (fs::temp_directory_path() / "pipeline_rerun").string();
    fs::remove_all(dir);
    pipeline::RunConfig cfg = make_cfg(dir);
    cfg.balance = "ros";  // gan-train not needed
    cfg.explain_method = "shap";
    cfg.shap_samples = 90;  // sampled mode; the encoded space has > 12 groups

    const std::vector<std::string> stages = {"preprocess", "generate", "clf-train",
                                             "evaluate",   "explain",  "report"};
    pipeline::run_pipeline(cfg, stages);

    const std::vector<std::string> tracked = {"train.matrix",     "augmented.matrix",
                                              "classifier.ckpt",  "eval.json",
                                              "explain.json",     "report.json"};
    std::vector<std::string> before;
    for (const auto& name : tracked) before.push_back(slurp(pipeline::artifact_path(cfg, name)));

    pipeline::run_pipeline(cfg, stages);
    for (std::size_t i = 0; i < tracked.size(); ++i) {
        CAPTURE(tracked[i]);
        CHECK(slurp(pipeline::artifact_path(cfg, tracked[i])) == before[i]);
    }

    // a different seed produces different model artifacts
    pipeline::RunConfig other = cfg;
    other.seed = 43;
    other.out_dir = dir + "/artifacts2";
    pipeline::run_pipeline(other, stages);
    CHECK(slurp(pipeline::artifact_path(other, "classifier.ckpt")) !=
          slurp(pipeline::artifact_path(cfg, "classifier.ckpt")));
}

TEST_CASE("unknown stages fail before any artifact is written") {
    const std::string dir = (fs::temp_directory_path() / "pipeline_unknown").string();
    fs::remove_all(dir);
    pipeline::RunConfig cfg = make_cfg(dir);
    cfg.out_dir = dir + "/artifacts_unknown";

    bool threw = false;
    try {
        pipeline::run_pipeline(cfg, {"preprocess", "frobnicate"});
    } catch (const ConfigError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
    }
    CHECK(threw);
    CHECK(!fs::exists(cfg.out_dir));
}

TEST_CASE("a stage with a missing upstream artifact names the file and producer") {
    const std::string dir = (fs::temp_directory_path() / "pipeline_missing").string();
    fs::remove_all(dir);
    pipeline::RunConfig cfg = make_cfg(dir);
    cfg.out_dir = dir + "/artifacts_missing";

    bool threw = false;
    try {
        pipeline::run_pipeline(cfg, {"clf-train"});
    } catch (const ConfigError& e) {
        threw = true;
        const std::string msg = e.what();
        CHECK(msg.find("augmented.matrix") != std::string::npos);
        CHECK(msg.find("generate") != std::string::npos);
    }
    CHECK(threw);

    threw = false;
    try {
        pipeline::run_pipeline(cfg, {"evaluate"});
    } catch (const ConfigError& e) {
        threw = true;
        const std::string msg = e.what();
        CHECK(msg.find("classifier.ckpt") != std::string::npos);
        CHECK(msg.find("clf-train") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("config validation lists every offending key at once") {
    pipeline::RunConfig cfg;
    cfg.balance = "bogus";
    cfg.task = "tri";
    cfg.lime_perturb = 5;
    bool threw = false;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        threw = true;
        const std::string msg = e.what();
        CHECK(msg.find("bogus") != std::string::npos);
        CHECK(msg.find("tri") != std::string::npos);
        CHECK(msg.find("lime_perturb") != std::string::npos);
    }
    CHECK(threw);

    pipeline::RunConfig ok;
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("config serialization round-trips and hashes are stable") {
    const std::string dir = (fs::temp_directory_path() / "pipeline_cfg").string();
    pipeline::RunConfig cfg = make_cfg(dir);
    cfg.artifact_overrides["train.matrix"] = "/tmp/elsewhere.matrix";

    const std::string h1 = pipeline::config_hash(cfg);
    CHECK(h1 == pipeline::config_hash(cfg));  // deterministic

    pipeline::RunConfig back = pipeline::RunConfig::from_json(cfg.to_json());
    CHECK(pipeline::config_hash(back) == h1);
    CHECK(back.artifact_overrides.at("train.matrix") == "/tmp/elsewhere.matrix");
    CHECK(back.gan.gen_hidden == 16);
    CHECK(back.clf.channels == 8);

    pipeline::RunConfig changed = cfg;
    changed.seed = cfg.seed + 1;
    CHECK(pipeline::config_hash(changed) != h1);

    // load from disk
    const std::string path = dir + "/config.json";
    {
        std::ofstream out(path);
        out << cfg.to_json().dump(2);
    }
    pipeline::RunConfig loaded = pipeline::RunConfig::load(path);
    CHECK(pipeline::config_hash(loaded) == h1);

    {
        std::ofstream out(dir + "/junk.json");
        out << "{nope";
    }
    CHECK_THROWS_AS(pipeline::RunConfig::load(dir + "/junk.json"), ParseError);
    CHECK_THROWS_AS(pipeline::RunConfig::load(dir + "/absent.json"), ConfigError);

    // artifact overrides redirect lookups
    CHECK(pipeline::artifact_path(cfg, "train.matrix") == "/tmp/elsewhere.matrix");
    CHECK(pipeline::artifact_path(cfg, "test.matrix") ==
          (fs::path(cfg.out_dir) / "test.matrix").string());
}
