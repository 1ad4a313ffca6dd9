#include "csagc/checkpoint.hpp"

#include <fstream>

#include "csagc/errors.hpp"

namespace csagc::io {

using nlohmann::json;

void save_checkpoint(const std::string& path, const std::string& kind, const json& config,
                     const std::vector<std::pair<std::string, ad::Tensor>>& params) {
    json manifest = json::array();
    for (const auto& [name, t] : params)
        manifest.push_back({{"name", name}, {"shape", t.shape()}});
    json header = {
        {"format", "csagc-checkpoint"},
        {"version", 1},
        {"kind", kind},
        {"config", config},
        {"params", manifest},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << header.dump() << "\n";
    for (const auto& [name, t] : params)
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!out) throw ParseError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header in " + path);
    Checkpoint ck;
    ck.header = json::parse(line, nullptr, false);
    if (ck.header.is_discarded() || ck.header.value("format", "") != "csagc-checkpoint")
        throw ParseError(path + " is not a csagc checkpoint");
    for (const auto& entry : ck.header.at("params")) {
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        std::vector<double> data(ad::shape_product(shape));
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!in) throw ParseError(path + " truncated at parameter " +
                                  entry.at("name").get<std::string>());
        ck.params.emplace(entry.at("name").get<std::string>(),
                          ad::Tensor(std::move(shape), std::move(data), true));
    }
    return ck;
}

}  // namespace csagc::io
