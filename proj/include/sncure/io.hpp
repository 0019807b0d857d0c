#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

#include "sncure/counterfactual.hpp"
#include "sncure/estimators.hpp"
#include "sncure/inference.hpp"
#include "sncure/simulation.hpp"

namespace sncure {

using Json = nlohmann::json;

/// Shortest text form of a double that reads back to the same value.
std::string format_real(double x);

/// Long format: one row per (individual, period k = -M..K) with header
/// `id,k,A,L1..Lp,x_time,death_observed`; covariate cells are empty past
/// floor(x_time). Events go to a second file with header `id,t`.
void write_panel(const Panel& panel, std::ostream& rows, std::ostream& events);
void write_panel(const Panel& panel, const std::filesystem::path& rows_path, const std::filesystem::path& events_path);

/// Parses the two-file format. `tau` defaults to K. Malformed rows raise
/// ValidationError naming the file and line.
Panel read_panel(std::istream& rows, std::istream& events, std::optional<double> tau = std::nullopt,
                 const std::string& rows_name = "panel", const std::string& events_name = "events");
Panel read_panel(const std::filesystem::path& rows_path, const std::filesystem::path& events_path,
                 std::optional<double> tau = std::nullopt);

Json to_json(const LearnerSpec& spec);
LearnerSpec learner_spec_from_json(const Json& j, LearnerSpec base = LearnerSpec::default_ensemble());

Json to_json(const EstimatorConfig& config);
/// Overlays the keys present in `j` onto `base`.
EstimatorConfig estimator_config_from_json(const Json& j, EstimatorConfig base = {});

Json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const Json& j, SimConfig base = {});
Json to_json(const SimMetadata& meta);

Json to_json(const EffectEstimates& est);
Json to_json(const BootstrapResult& boot);

/// Reads the `beta` array (and bootstrap replicates, when present) of a
/// fitted-estimates document.
std::vector<double> beta_from_json(const Json& j);
std::optional<BootstrapResult> bootstrap_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sncure
