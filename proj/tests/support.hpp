#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sncure/panel.hpp"

namespace sncure::testing {

/// Individual with exposures for k = -M..K, `width` covariate columns filled
/// by `cov(k, j)` up to floor(x), and the given events.
template <class Cov>
Individual make_individual(const std::string& id, int M, int K, const std::vector<double>& exposures, double x,
                           bool death, std::vector<double> events, int width, Cov cov) {
    Individual ind;
    ind.id = id;
    ind.exposures = exposures;
    ind.x_time = x;
    ind.death_observed = death;
    ind.event_times = std::move(events);
    const int last = static_cast<int>(std::floor(x));
    for (int k = -M; k <= last; ++k)
        for (int j = 0; j < width; ++j) ind.covariates.push_back(cov(k, j));
    (void)K;
    return ind;
}

inline Individual flat_individual(const std::string& id, int M, int K, double a, double x, bool death,
                                  std::vector<double> events, double l = 0.0) {
    return make_individual(id, M, K, std::vector<double>(static_cast<std::size_t>(M + K + 1), a), x, death,
                           std::move(events), 1, [l](int, int) { return l; });
}

/// Uniform exposures and one uniform covariate column.
inline Individual random_individual(const std::string& id, int M, int K, double x, bool death,
                                    std::vector<double> events, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a(static_cast<std::size_t>(M + K + 1));
    for (auto& v : a) v = u(rng);
    std::vector<double> l(a.size());
    for (auto& v : l) v = u(rng);
    return make_individual(id, M, K, a, x, death, std::move(events), 1,
                           [&l, M](int k, int) { return l[static_cast<std::size_t>(k + M)]; });
}

}  // namespace sncure::testing
