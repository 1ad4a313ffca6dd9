#include "csagc/matrix_io.hpp"

#include <cstring>
#include <fstream>

#include "csagc/errors.hpp"

namespace csagc::io {

using nlohmann::json;

namespace {

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw ParseError("matrix file truncated in value section");
}

}  // namespace

void save_matrix(const std::string& path, const dataset::FeatureMatrix& fm, const json& extra) {
    json header = {
        {"format", "csagc-matrix"},
        {"version", 1},
        {"shape", {fm.rows(), fm.cols()}},
        {"feature_names", fm.feature_names},
        {"mu", fm.mu},
        {"sigma", fm.sigma},
        {"class_map", std::vector<std::string>(dataset::kClassNames.begin(),
                                               dataset::kClassNames.end())},
        {"unseen_category_count", fm.unseen_category_count},
    };
    for (auto& [k, v] : extra.items()) header[k] = v;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << header.dump() << "\n";
    write_doubles(out, fm.values.data());
    std::vector<std::int32_t> labels(fm.labels.begin(), fm.labels.end());
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
    if (!out) throw ParseError("write failed for " + path);
}

json load_matrix_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header in " + path);
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "csagc-matrix")
        throw ParseError(path + " is not a csagc matrix file");
    return header;
}

dataset::FeatureMatrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header in " + path);
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "csagc-matrix")
        throw ParseError(path + " is not a csagc matrix file");
    const int n = header["shape"][0], d = header["shape"][1];
    dataset::FeatureMatrix fm;
    fm.feature_names = header["feature_names"].get<std::vector<std::string>>();
    fm.mu = header["mu"].get<std::vector<double>>();
    fm.sigma = header["sigma"].get<std::vector<double>>();
    fm.unseen_category_count = header.value("unseen_category_count", 0L);
    std::vector<double> values(static_cast<std::size_t>(n) * d);
    read_doubles(in, values);
    fm.values = ad::Tensor({n, d}, std::move(values));
    std::vector<std::int32_t> labels(n);
    in.read(reinterpret_cast<char*>(labels.data()),
            static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
    if (!in) throw ParseError("matrix file truncated in label section");
    fm.labels.assign(labels.begin(), labels.end());
    return fm;
}

}  // namespace csagc::io
