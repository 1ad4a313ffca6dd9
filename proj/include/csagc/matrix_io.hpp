#pragma once

#include <string>

#include <json.hpp>

#include "csagc/dataset.hpp"

namespace csagc::io {

// Portable matrix file: one JSON header line (feature names, shape, mu, sigma,
// class map) followed by a binary section of row-major little-endian float64
// values and one int32 label per row. See README for the exact layout.
void save_matrix(const std::string& path, const dataset::FeatureMatrix& fm,
                 const nlohmann::json& extra = nlohmann::json::object());

dataset::FeatureMatrix load_matrix(const std::string& path);
nlohmann::json load_matrix_header(const std::string& path);

}  // namespace csagc::io
