#pragma once

#include <random>
#include <vector>

#include "csagc/tensor.hpp"

namespace csagc::ad {

// Bias-corrected Adam over a flat list of parameter tensors.
struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(const std::vector<Tensor>& params, double beta1 = 0.9,
                          double beta2 = 0.999, double epsilon = 1e-8);
};

// Applies one Adam update using each parameter's accumulated grad.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

void zero_grads(std::vector<Tensor>& params);

// Weight initializers, standard fan-in formulas.
Tensor he_normal(std::vector<int> shape, int fan_in, std::mt19937_64& rng);
Tensor xavier_normal(std::vector<int> shape, int fan_in, int fan_out, std::mt19937_64& rng);

}  // namespace csagc::ad
