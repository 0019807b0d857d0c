#include "sncure/inference.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "sncure/errors.hpp"

namespace sncure {

std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::uint64_t replicate,
                                          std::uint64_t attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(attempt), 0xB0075u};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = pick(rng);
    return out;
}

Panel resample_panel(const Panel& panel, std::span<const std::size_t> draws) {
    std::vector<Individual> people;
    people.reserve(draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d) {
        Individual ind = panel[draws[d]];
        ind.cluster = ind.cluster_key();
        ind.id += "#" + std::to_string(d);
        people.push_back(std::move(ind));
    }
    return Panel(std::move(people), panel.baseline_len(), panel.horizon(), panel.tau(), panel.covariate_width());
}

std::vector<double> replicate_sd(const std::vector<std::vector<double>>& replicates) {
    if (replicates.empty()) return {};
    const std::size_t p = replicates.front().size();
    const double r = static_cast<double>(replicates.size());
    std::vector<double> mean(p, 0.0), out(p, 0.0);
    for (const auto& row : replicates)
        for (std::size_t j = 0; j < p; ++j) mean[j] += row[j] / r;
    for (const auto& row : replicates)
        for (std::size_t j = 0; j < p; ++j) out[j] += (row[j] - mean[j]) * (row[j] - mean[j]) / r;
    for (auto& v : out) v = std::sqrt(v);
    return out;
}

double normal_critical(double level) {
    if (!(level > 0.0 && level < 1.0)) throw UsageError("InvalidConfig", "ci_level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2.0);
}

BootstrapResult bootstrap(const Panel& panel, const ReplicateFit& fit, const BootstrapOptions& options,
                          const std::string& method) {
    if (options.replicates < 1) throw UsageError("InvalidConfig", "bootstrap needs R >= 1");
    if (panel.size() == 0) throw UsageError("EmptyPanel", "cannot resample an empty panel");
    normal_critical(options.ci_level);

    const auto R = static_cast<std::size_t>(options.replicates);
    struct Slot {
        std::vector<double> beta;
        int attempts = 0;
        bool ok = false;
        std::string last_error;
    };
    std::vector<Slot> slots(R);
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    auto worker = [&] {
        for (std::size_t r = next++; r < R; r = next++) {
            auto& slot = slots[r];
            for (int attempt = 0; attempt <= options.max_retries && !slot.ok; ++attempt) {
                ++slot.attempts;
                try {
                    const auto draws = resample_indices(panel.size(), options.seed, r, static_cast<std::uint64_t>(attempt));
                    const std::uint64_t stream = options.seed ^ (0x9E3779B97F4A7C15ULL * (r + 1)) ^
                                                 (static_cast<std::uint64_t>(attempt) << 56);
                    slot.beta = fit(resample_panel(panel, draws), stream);
                    slot.ok = true;
                } catch (const NumericalError& e) {
                    slot.last_error = e.what();
                } catch (...) {
                    std::lock_guard lock(fatal_mutex);
                    if (!fatal) fatal = std::current_exception();
                    next = R;
                    return;
                }
            }
        }
    };
    const int threads = std::max(1, std::min<int>(options.threads, options.replicates));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    BootstrapResult out;
    out.ci_level = options.ci_level;
    out.method = method;
    out.requested = R;
    for (std::size_t r = 0; r < R; ++r) {
        const auto& slot = slots[r];
        if (slot.attempts > 1) ++out.retried;
        if (slot.ok) {
            if (!out.replicates.empty() && slot.beta.size() != out.replicates.front().size())
                throw UsageError("DimensionMismatch", "replicate fits returned different lengths");
            out.replicates.push_back(slot.beta);
        } else {
            ++out.excluded;
            out.warnings.push_back("replicate " + std::to_string(r) + " excluded: " + slot.last_error);
        }
    }
    if (static_cast<double>(out.excluded) > options.max_excluded_fraction * static_cast<double>(R) ||
        out.replicates.empty()) {
        std::ostringstream msg;
        msg << out.excluded << " of " << R << " bootstrap replicates failed";
        if (!out.warnings.empty()) msg << " (" << out.warnings.front() << ")";
        throw NumericalError("BootstrapFailure", msg.str());
    }
    out.se = replicate_sd(out.replicates);
    return out;
}

BootstrapResult bootstrap(const Panel& panel, const EstimatorConfig& config, const BootstrapOptions& options) {
    config.validate();
    auto fit = [config](const Panel& resampled, std::uint64_t stream) {
        EstimatorConfig local = config;
        local.seed = stream;
        return run_estimator(resampled, local).beta;
    };
    return bootstrap(panel, fit, options, to_string(config.kind));
}

EffectEstimates summarize(const BootstrapResult& result, EffectEstimates point) {
    if (result.se.size() != point.beta.size()) {
        std::ostringstream msg;
        msg << "bootstrap has " << result.se.size() << " coefficients, estimates have " << point.beta.size();
        throw UsageError("DimensionMismatch", msg.str());
    }
    const double z = normal_critical(result.ci_level);
    point.se = result.se;
    point.ci.clear();
    for (std::size_t j = 0; j < point.beta.size(); ++j)
        point.ci.emplace_back(point.beta[j] - z * result.se[j], point.beta[j] + z * result.se[j]);
    point.ci_level = result.ci_level;
    return point;
}

}  // namespace sncure
