#include "sncure/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sncure/errors.hpp"

namespace sncure {

std::string format_real(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    out.push_back(cell);
    return out;
}

std::string where(const std::string& file, std::size_t line) { return file + " line " + std::to_string(line); }

double parse_real(const std::string& cell, const std::string& file, std::size_t line, const std::string& column) {
    double value = 0.0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
        throw ValidationError(where(file, line) + ": column " + column + " is not a finite number ('" + cell + "')");
    return value;
}

int parse_int(const std::string& cell, const std::string& file, std::size_t line, const std::string& column) {
    int value = 0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc() || ptr != end)
        throw ValidationError(where(file, line) + ": column " + column + " is not an integer ('" + cell + "')");
    return value;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace

void write_panel(const Panel& panel, std::ostream& rows, std::ostream& events) {
    const int M = panel.baseline_len();
    const int p = panel.covariate_width();
    rows << "id,k,A";
    for (int j = 1; j <= p; ++j) rows << ",L" << j;
    rows << ",x_time,death_observed\n";
    events << "id,t\n";
    for (const auto& ind : panel.individuals()) {
        const int last_row = panel.covariate_rows(ind) - M - 1;
        const std::string tail = "," + format_real(ind.x_time) + "," + (ind.death_observed ? "1" : "0") + "\n";
        for (int k = -M; k <= panel.horizon(); ++k) {
            rows << ind.id << ',' << k << ',' << format_real(panel.exposure(ind, k));
            if (k <= last_row) {
                for (double v : panel.covariates(ind, k)) rows << ',' << format_real(v);
            } else {
                for (int j = 0; j < p; ++j) rows << ',';
            }
            rows << tail;
        }
        for (double t : ind.event_times) events << ind.id << ',' << format_real(t) << '\n';
    }
    if (!rows || !events) throw IoError("write failed");
}

void write_panel(const Panel& panel, const std::filesystem::path& rows_path, const std::filesystem::path& events_path) {
    auto rows = open_out(rows_path);
    auto events = open_out(events_path);
    write_panel(panel, rows, events);
}

Panel read_panel(std::istream& rows, std::istream& events, std::optional<double> tau, const std::string& rows_name,
                 const std::string& events_name) {
    std::string line;
    if (!std::getline(rows, line)) throw ValidationError(rows_name + ": empty file");
    const auto header = split_csv(line);
    if (header.size() < 5 || header[0] != "id" || header[1] != "k" || header[2] != "A" ||
        header[header.size() - 2] != "x_time" || header.back() != "death_observed")
        throw ValidationError(where(rows_name, 1) + ": expected header id,k,A,L1..Lp,x_time,death_observed");
    const std::size_t p = header.size() - 5;

    struct Draft {
        Individual ind;
        std::vector<int> periods;
        std::size_t first_line = 0;
    };
    std::vector<Draft> drafts;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 1;
    int k_min = 0, k_max = 0;
    bool any = false;
    while (std::getline(rows, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ValidationError(where(rows_name, line_no) + ": expected " + std::to_string(header.size()) +
                                  " columns, found " + std::to_string(cells.size()));
        if (cells[0].empty()) throw ValidationError(where(rows_name, line_no) + ": empty id");
        const int k = parse_int(cells[1], rows_name, line_no, "k");
        const double a = parse_real(cells[2], rows_name, line_no, "A");
        const double x = parse_real(cells[cells.size() - 2], rows_name, line_no, "x_time");
        const auto& flag = cells.back();
        if (flag != "0" && flag != "1")
            throw ValidationError(where(rows_name, line_no) + ": death_observed must be 0 or 1");

        const auto [it, inserted] = index.try_emplace(cells[0], drafts.size());
        if (inserted) {
            drafts.emplace_back();
            drafts.back().ind.id = cells[0];
            drafts.back().ind.x_time = x;
            drafts.back().ind.death_observed = flag == "1";
            drafts.back().first_line = line_no;
        }
        auto& d = drafts[it->second];
        if (d.ind.x_time != x || d.ind.death_observed != (flag == "1"))
            throw ValidationError(where(rows_name, line_no) + ": x_time/death_observed differ from earlier rows of " +
                                  cells[0]);
        if (!d.periods.empty() && k != d.periods.back() + 1)
            throw ValidationError(where(rows_name, line_no) + ": periods of " + cells[0] +
                                  " must be consecutive and increasing");
        d.periods.push_back(k);
        d.ind.exposures.push_back(a);

        std::size_t filled = 0;
        for (std::size_t j = 0; j < p; ++j) filled += cells[3 + j].empty() ? 0 : 1;
        if (filled != 0 && filled != p)
            throw ValidationError(where(rows_name, line_no) + ": covariates must be all present or all empty");
        if (filled == p && p > 0) {
            const std::size_t have_rows = d.ind.covariates.size() / p;
            if (have_rows + 1 != d.periods.size())
                throw ValidationError(where(rows_name, line_no) + ": covariate row after an empty one");
            for (std::size_t j = 0; j < p; ++j)
                d.ind.covariates.push_back(parse_real(cells[3 + j], rows_name, line_no, header[3 + j]));
        }
        k_min = any ? std::min(k_min, k) : k;
        k_max = any ? std::max(k_max, k) : k;
        any = true;
    }
    if (!any) throw ValidationError(rows_name + ": no data rows");
    if (k_min > 0) throw ValidationError(rows_name + ": periods must start at or before k=0");
    for (const auto& d : drafts)
        if (d.periods.front() != k_min)
            throw ValidationError(where(rows_name, d.first_line) + ": series of " + d.ind.id + " starts at k=" +
                                  std::to_string(d.periods.front()) + ", expected " + std::to_string(k_min));

    if (!std::getline(events, line)) throw ValidationError(events_name + ": empty file");
    if (split_csv(line) != std::vector<std::string>{"id", "t"})
        throw ValidationError(where(events_name, 1) + ": expected header id,t");
    line_no = 1;
    while (std::getline(events, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != 2) throw ValidationError(where(events_name, line_no) + ": expected 2 columns");
        const auto it = index.find(cells[0]);
        if (it == index.end()) throw ValidationError(where(events_name, line_no) + ": unknown id " + cells[0]);
        drafts[it->second].ind.event_times.push_back(parse_real(cells[1], events_name, line_no, "t"));
    }

    std::vector<Individual> people;
    people.reserve(drafts.size());
    for (auto& d : drafts) people.push_back(std::move(d.ind));
    const double t = tau.value_or(static_cast<double>(k_max));
    return Panel(std::move(people), -k_min, k_max, t, static_cast<int>(p));
}

Panel read_panel(const std::filesystem::path& rows_path, const std::filesystem::path& events_path,
                 std::optional<double> tau) {
    auto rows = open_in(rows_path);
    auto events = open_in(events_path);
    return read_panel(rows, events, tau, rows_path.string(), events_path.string());
}

namespace {

const char* kind_name(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::linear:
            return "linear";
        case LearnerKind::gbt:
            return "gbt";
        case LearnerKind::ensemble:
            return "ensemble";
    }
    return "linear";
}

LearnerKind parse_kind(const std::string& s) {
    if (s == "linear") return LearnerKind::linear;
    if (s == "gbt") return LearnerKind::gbt;
    if (s == "ensemble") return LearnerKind::ensemble;
    throw UsageError("InvalidLearner", "unknown learner kind '" + s + "'");
}

template <class T>
void overlay(const Json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw UsageError("InvalidConfig", std::string(key) + ": " + e.what());
    }
}

}  // namespace

Json to_json(const LearnerSpec& spec) {
    Json j{{"kind", kind_name(spec.kind)}, {"seed", spec.seed}};
    if (spec.kind == LearnerKind::gbt)
        j["gbt"] = {{"rounds", spec.gbt.rounds},
                    {"learning_rate", spec.gbt.learning_rate},
                    {"max_depth", spec.gbt.max_depth},
                    {"min_leaf", spec.gbt.min_leaf}};
    if (spec.kind == LearnerKind::ensemble) {
        j["stack_folds"] = spec.stack_folds;
        j["members"] = Json::array();
        for (const auto& m : spec.members) j["members"].push_back(to_json(m));
    }
    return j;
}

LearnerSpec learner_spec_from_json(const Json& j, LearnerSpec base) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "linear") return LearnerSpec::linear();
        if (name == "ensemble") return LearnerSpec::default_ensemble();
        if (name == "gbt") return LearnerSpec::boosted(200, 0.1);
        throw UsageError("InvalidLearner", "unknown learner '" + name + "'");
    }
    if (j.contains("kind")) {
        const auto kind = parse_kind(j.at("kind").get<std::string>());
        if (kind != base.kind) {
            base = kind == LearnerKind::ensemble ? LearnerSpec::default_ensemble()
                   : kind == LearnerKind::gbt    ? LearnerSpec::boosted(200, 0.1)
                                                 : LearnerSpec::linear();
        }
    }
    overlay(j, "seed", base.seed);
    overlay(j, "stack_folds", base.stack_folds);
    if (j.contains("gbt")) {
        const auto& g = j.at("gbt");
        overlay(g, "rounds", base.gbt.rounds);
        overlay(g, "learning_rate", base.gbt.learning_rate);
        overlay(g, "max_depth", base.gbt.max_depth);
        overlay(g, "min_leaf", base.gbt.min_leaf);
    }
    if (j.contains("members")) {
        base.members.clear();
        for (const auto& m : j.at("members")) base.members.push_back(learner_spec_from_json(m, LearnerSpec::linear()));
    }
    base.validate();
    return base;
}

Json to_json(const EstimatorConfig& c) {
    Json j{{"estimator", to_string(c.kind)},
           {"lags", c.lags},
           {"bins", c.bins},
           {"exposure_window", c.exposure_window},
           {"folds", c.folds},
           {"seed", c.seed},
           {"mu_learner", to_json(c.mu_spec)},
           {"rho_learner", to_json(c.rho_spec)}};
    j["weight_cap"] = c.weight_cap ? Json(*c.weight_cap) : Json(nullptr);
    return j;
}

EstimatorConfig estimator_config_from_json(const Json& j, EstimatorConfig base) {
    if (j.contains("estimator")) base.kind = parse_estimator(j.at("estimator").get<std::string>());
    overlay(j, "lags", base.lags);
    overlay(j, "bins", base.bins);
    overlay(j, "exposure_window", base.exposure_window);
    overlay(j, "folds", base.folds);
    overlay(j, "seed", base.seed);
    if (j.contains("mu_learner")) base.mu_spec = learner_spec_from_json(j.at("mu_learner"), base.mu_spec);
    if (j.contains("rho_learner")) base.rho_spec = learner_spec_from_json(j.at("rho_learner"), base.rho_spec);
    if (j.contains("weight_cap")) {
        if (j.at("weight_cap").is_null()) {
            base.weight_cap.reset();
        } else {
            double cap = 0.0;
            overlay(j, "weight_cap", cap);
            base.weight_cap = cap;
        }
    }
    return base;
}

Json to_json(const SimConfig& c) {
    Json j{{"n", c.n},
           {"K", c.horizon},
           {"M", c.baseline},
           {"sigma1", c.sigma1},
           {"sigma2", c.sigma2},
           {"ar", c.ar},
           {"frailty_mean", c.frailty_mean},
           {"scenario", to_string(c.scenario)},
           {"beta_true", c.beta_true},
           {"alpha_true", c.alpha_true},
           {"censor_scale", c.censor_scale},
           {"var_ratio", c.var_ratio},
           {"expose_frailty", c.expose_frailty},
           {"seed", c.seed}};
    j["c"] = c.c_override ? Json(*c.c_override) : Json(nullptr);
    return j;
}

SimConfig sim_config_from_json(const Json& j, SimConfig base) {
    overlay(j, "n", base.n);
    overlay(j, "K", base.horizon);
    overlay(j, "M", base.baseline);
    overlay(j, "sigma1", base.sigma1);
    overlay(j, "sigma2", base.sigma2);
    overlay(j, "ar", base.ar);
    overlay(j, "frailty_mean", base.frailty_mean);
    if (j.contains("scenario")) base.scenario = parse_scenario(j.at("scenario").get<std::string>());
    overlay(j, "beta_true", base.beta_true);
    overlay(j, "alpha_true", base.alpha_true);
    overlay(j, "censor_scale", base.censor_scale);
    overlay(j, "var_ratio", base.var_ratio);
    overlay(j, "expose_frailty", base.expose_frailty);
    overlay(j, "seed", base.seed);
    if (j.contains("c") && !j.at("c").is_null()) {
        double c = 0.0;
        overlay(j, "c", c);
        base.c_override = c;
    }
    return base;
}

Json to_json(const SimMetadata& meta) {
    return Json{{"config", to_json(meta.config)},
                {"c", meta.c},
                {"exposure_normalization",
                 {{"scope", "global min-max over all person-periods"},
                  {"raw_min", meta.exposure_min},
                  {"raw_max", meta.exposure_max}}},
                {"realized_var_ratio", meta.realized_var_ratio},
                {"person_periods", meta.person_periods},
                {"deaths", meta.deaths},
                {"censored", meta.censored},
                {"events", meta.events}};
}

namespace {

Json diagnostics_json(const std::vector<LagDiagnostics>& diags) {
    Json out = Json::array();
    for (std::size_t m = 0; m < diags.size(); ++m) {
        const auto& d = diags[m];
        out.push_back({{"lag", m},
                       {"numerator", d.numerator},
                       {"denominator", d.denominator},
                       {"person_periods", d.person_periods},
                       {"skipped_periods", d.skipped_periods},
                       {"clamped_weights", d.clamped_weights},
                       {"weight_min", d.weight_min},
                       {"weight_max", d.weight_max}});
    }
    return out;
}

}  // namespace

Json to_json(const EffectEstimates& est) {
    Json j{{"method", to_string(est.method)},
           {"beta", est.beta},
           {"alpha", est.alpha.alpha},
           {"alpha_provenance", est.alpha.provenance},
           {"diagnostics", diagnostics_json(est.diagnostics)},
           {"alpha_diagnostics", diagnostics_json(est.alpha_diagnostics)}};
    if (!est.se.empty()) {
        j["se"] = est.se;
        j["ci_level"] = est.ci_level;
        Json ci = Json::array();
        for (const auto& [lo, hi] : est.ci) ci.push_back({lo, hi});
        j["ci"] = ci;
    }
    return j;
}

Json to_json(const BootstrapResult& boot) {
    return Json{{"requested", boot.requested}, {"retried", boot.retried}, {"excluded", boot.excluded},
                {"ci_level", boot.ci_level},   {"se", boot.se},           {"replicates", boot.replicates},
                {"warnings", boot.warnings}};
}

std::vector<double> beta_from_json(const Json& j) {
    if (!j.contains("beta")) throw ValidationError("estimates document has no beta array");
    return j.at("beta").get<std::vector<double>>();
}

std::optional<BootstrapResult> bootstrap_from_json(const Json& j) {
    if (!j.contains("bootstrap")) return std::nullopt;
    const auto& b = j.at("bootstrap");
    BootstrapResult out;
    out.replicates = b.at("replicates").get<std::vector<std::vector<double>>>();
    out.se = b.at("se").get<std::vector<double>>();
    out.ci_level = b.value("ci_level", 0.95);
    out.requested = b.value("requested", out.replicates.size());
    out.excluded = b.value("excluded", std::size_t{0});
    return out;
}

Json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sncure
