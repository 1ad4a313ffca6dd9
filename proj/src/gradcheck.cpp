#include "csagc/gradcheck.hpp"

#include <cmath>
#include <random>

#include "csagc/errors.hpp"

namespace csagc::ad {

double grad_check(const std::function<Tensor()>& forward, std::vector<Tensor>& params,
                  double eps, double abs_floor, std::size_t max_coords) {
    if (!(eps > 0.0 && eps <= 1e-2))
        throw ContractError("grad_check: eps must lie in (0, 1e-2]");

    for (auto& p : params) p.zero_grad();
    Tensor loss = forward();
    check_finite(loss, "grad_check forward");
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(p.grad());

    std::size_t total = 0;
    for (const auto& p : params) total += p.size();

    // coordinate list, sampled deterministically when too large
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    if (total <= max_coords) {
        for (std::size_t i = 0; i < params.size(); ++i)
            for (std::size_t j = 0; j < params[i].size(); ++j) coords.emplace_back(i, j);
    } else {
        std::mt19937_64 rng(0x9d5c0fb1u);
        std::uniform_int_distribution<std::size_t> pick(0, total - 1);
        for (std::size_t n = 0; n < max_coords; ++n) {
            std::size_t flat = pick(rng);
            std::size_t i = 0;
            while (flat >= params[i].size()) flat -= params[i++].size();
            coords.emplace_back(i, flat);
        }
    }

    double worst = 0.0;
    for (auto [i, j] : coords) {
        double& w = params[i].data()[j];
        const double saved = w;
        w = saved + eps;
        const double fp = forward().item();
        w = saved - eps;
        const double fm = forward().item();
        w = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite loss during finite differencing");
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[i][j];
        const double denom = std::max(abs_floor, std::max(std::fabs(a), std::fabs(numeric)));
        worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace csagc::ad
