#include "csagc/optim.hpp"

#include <cmath>

#include "csagc/errors.hpp"

namespace csagc::ad {

AdamState AdamState::init(const std::vector<Tensor>& params, double beta1, double beta2,
                          double epsilon) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.size(), 0.0);
        s.second_moment.emplace_back(p.size(), 0.0);
    }
    return s;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
    if (lr <= 0.0) throw ContractError("adam_step: lr must be positive");
    if (params.size() != state.first_moment.size())
        throw DimensionError("adam_step: state tracks " +
                             std::to_string(state.first_moment.size()) + " tensors, got " +
                             std::to_string(params.size()));
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].data();
        auto& g = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        if (m.size() != p.size())
            throw DimensionError("adam_step: moment length " + std::to_string(m.size()) +
                                 " does not match parameter length " + std::to_string(p.size()));
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

Tensor he_normal(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / fan_in), true);
}

Tensor xavier_normal(std::vector<int> shape, int fan_in, int fan_out, std::mt19937_64& rng) {
    return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / (fan_in + fan_out)), true);
}

}  // namespace csagc::ad
