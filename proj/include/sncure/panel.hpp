#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sncure {

/// One individual's observed trajectory.
///
/// Exposures are external and cover every period -M..K regardless of death
/// or censoring. Covariate rows exist only for periods -M..floor(x_time).
/// Periods are half-open: period k is [k, k+1).
struct Individual {
    std::string id;
    /// Resampling cluster. Bootstrap clones share the cluster of their
    /// source individual so fold plans never split them. Empty means `id`.
    std::string cluster;
    std::vector<double> exposures;   // index k + M
    std::vector<double> covariates;  // row-major, (floor(x_time) + M + 1) x width
    std::vector<double> event_times; // strictly increasing, in (0, x_time]
    double x_time = 0.0;
    bool death_observed = false;

    const std::string& cluster_key() const { return cluster.empty() ? id : cluster; }
};

class Panel {
  public:
    Panel() = default;
    Panel(std::vector<Individual> individuals, int baseline_len, int horizon, double tau,
          int covariate_width);

    std::size_t size() const { return individuals_.size(); }
    const std::vector<Individual>& individuals() const { return individuals_; }
    const Individual& operator[](std::size_t i) const { return individuals_[i]; }

    int baseline_len() const { return baseline_len_; }   // M
    int horizon() const { return horizon_; }             // K
    double tau() const { return tau_; }
    int covariate_width() const { return covariate_width_; }

    /// Periods k = 0..last_period() intersect [0, tau) with positive length.
    int last_period() const;

    double exposure(const Individual& ind, int k) const {
        return ind.exposures[static_cast<std::size_t>(k + baseline_len_)];
    }
    bool has_exposure(int k) const { return k >= -baseline_len_ && k <= horizon_; }

    /// Covariate row for period k; requires -M <= k <= floor(x_time).
    std::span<const double> covariates(const Individual& ind, int k) const;
    int covariate_rows(const Individual& ind) const;

    /// Panel made of the given individuals (by index, repeats allowed).
    Panel subset(std::span<const std::size_t> indices) const;

  private:
    std::vector<Individual> individuals_;
    int baseline_len_ = 0;
    int horizon_ = 0;
    double tau_ = 0.0;
    int covariate_width_ = 0;
};

/// Within-period discretization used by pseudo-data and quadrature.
class TimeGrid {
  public:
    explicit TimeGrid(int bins_per_period = 5);

    int bins() const { return bins_; }
    double width() const { return 1.0 / bins_; }
    double bin_start(int k, int b) const { return k + static_cast<double>(b) / bins_; }
    double midpoint(int k, int b) const { return k + (b + 0.5) / bins_; }
    std::vector<double> midpoints(int k) const;

  private:
    int bins_;
};

/// A quadrature node: the at-risk part of one bin, [start, min(end, X)],
/// represented by its midpoint and length.
struct QuadNode {
    int bin;
    double t;
    double length;
};

/// At-risk quadrature nodes of period k for an individual. Bins entirely
/// after x_time are omitted; a bin containing x_time is truncated there.
std::vector<QuadNode> at_risk_nodes(const Individual& ind, int k, const TimeGrid& grid);

/// Y(t) = I(X >= t).
inline int at_risk(const Individual& ind, double t) { return ind.x_time >= t ? 1 : 0; }

struct EventSlice {
    std::size_t count;
    std::span<const double> times;
};

/// Events in [a, b).
EventSlice events_in(const Individual& ind, double a, double b);

struct Violation {
    std::size_t individual;
    std::string id;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string summary(std::size_t max_items = 10) const;
};

ValidationReport validate_panel(const Panel& panel);

}  // namespace sncure
