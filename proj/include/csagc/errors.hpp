#pragma once

#include <stdexcept>
#include <string>

namespace csagc {

// Shape disagreement between tensors or layers.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// A caller violated an operation precondition (non-one-hot condition,
// probability outside [0,1], non-scalar loss, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf surfaced where finite values are required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct InternalError : std::runtime_error {
    explicit InternalError(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged; carries the epoch of the last finite checkpoint so the
// caller can recover it from the training log / checkpoint directory.
struct TrainingError : std::runtime_error {
    TrainingError(const std::string& what, int last_good_epoch)
        : std::runtime_error(what), last_good_epoch(last_good_epoch) {}
    int last_good_epoch;
};

}  // namespace csagc
