#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "csagc/checkpoint.hpp"
#include "csagc/errors.hpp"
#include "csagc/matrix_io.hpp"
#include "csagc/rng.hpp"
#include "support/fixture.hpp"

using namespace csagc;

namespace {
std::string tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("matrix save/load round-trips bit-exactly") {
    dataset::FeatureMatrix fm = fixture::gaussian_task(7, 5, 3, 2.0, 11);
    fm.unseen_category_count = 4;
    const std::string path = tmp("m1.matrix");
    io::save_matrix(path, fm, {{"note", "roundtrip"}});

    dataset::FeatureMatrix back = io::load_matrix(path);
    CHECK(back.values.shape() == fm.values.shape());
    CHECK(back.values.data() == fm.values.data());  // bit-exact via binary floats
    CHECK(back.labels == fm.labels);
    CHECK(back.feature_names == fm.feature_names);
    CHECK(back.mu == fm.mu);
    CHECK(back.sigma == fm.sigma);
    CHECK(back.unseen_category_count == 4);

    nlohmann::json hdr = io::load_matrix_header(path);
    CHECK(hdr.at("note") == "roundtrip");
    CHECK(hdr.at("format") == "csagc-matrix");

    // identical save is byte-identical
    const std::string path2 = tmp("m2.matrix");
    io::save_matrix(path2, fm, {{"note", "roundtrip"}});
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("matrix loader rejects junk") {
    CHECK_THROWS_AS(io::load_matrix(tmp("missing_file.matrix")), ParseError);
    {
        std::ofstream out(tmp("junk.matrix"), std::ios::binary);
        out << "not json\n";
    }
    CHECK_THROWS_AS(io::load_matrix(tmp("junk.matrix")), ParseError);
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
    auto rng = make_rng(3, "io-test");
    ad::Tensor w = ad::Tensor::randn({4, 3}, rng, 1.0, true);
    ad::Tensor b = ad::Tensor::randn({3}, rng, 1.0, true);
    const std::string path = tmp("c1.ckpt");
    io::save_checkpoint(path, "demo", {{"width", 3}}, {{"w", w}, {"b", b}});

    io::Checkpoint ck = io::load_checkpoint(path);
    CHECK(ck.kind() == "demo");
    CHECK(ck.config().at("width") == 3);
    REQUIRE(ck.params.count("w") == 1);
    CHECK(ck.params.at("w").shape() == w.shape());
    CHECK(ck.params.at("w").data() == w.data());
    CHECK(ck.params.at("b").data() == b.data());

    CHECK_THROWS_AS(io::load_checkpoint(tmp("missing.ckpt")), ParseError);
}
