#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csagc/tensor.hpp"

namespace csagc::io {

// Model checkpoint: versioned JSON header line (kind, architecture config,
// seed, epoch, parameter manifest) followed by the raw little-endian float64
// parameter arrays in manifest order. Reload is bit-exact.
void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config,
                     const std::vector<std::pair<std::string, ad::Tensor>>& params);

struct Checkpoint {
    nlohmann::json header;
    std::map<std::string, ad::Tensor> params;

    std::string kind() const { return header.value("kind", ""); }
    const nlohmann::json& config() const { return header.at("config"); }
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace csagc::io
