#include "cli.hpp"

#include "nafe/bootstrap.hpp"
#include "nafe/errors.hpp"
#include "nafe/estimators.hpp"
#include "nafe/panel_data.hpp"
#include "nafe/rng.hpp"
#include "nafe/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef NAFE_VERSION
#define NAFE_VERSION "dev"
#endif

namespace nafe::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

SimGrid preset_grid(const std::string& table) {
    SimGrid g;
    if (table == "custom") return g;
    if (table == "t1") {
        g.families = {DgpFamily::Baseline};
        g.ns = {100, 200, 500, 1000, 2000, 5000, 10000};
        g.rates = {0.25, 0.5, 0.75, 1.0};
        g.rhos = {1.0};
        g.sigma_vs = {1.0};
        g.x_star_rules = {XStarRule::slope_point(4.5)};
        g.estimators = {Estimator::Nafe};
    } else if (table == "t2") {
        g.families = {DgpFamily::Baseline};
        g.ns = {100};
        g.Ts = {100};
        g.rhos = {0.0, 1.0};
        g.sigma_vs = {0.1};
        g.x_star_rules.clear();
        for (double x : {2.5, 3.5, 4.5, 5.5, 6.5}) g.x_star_rules.push_back(XStarRule::slope_point(x));
        g.estimators = {Estimator::Nafe};
    } else if (table == "t3") {
        g.families = {DgpFamily::RankMixture};
        g.ns = {100};
        g.Ts = {100};
        g.rhos = {0.0, 1.0, 3.0, 10.0};
        g.sigma_vs = {0.01, 0.1, 1.0};
        g.x_star_rules = {XStarRule::slope_point(4.0)};
        g.estimators = {Estimator::Nafe, Estimator::Feqr};
    } else if (table == "t8") {
        g.families = {DgpFamily::Multiplicative};
        g.ns = {100};
        g.Ts = {100};
        g.rhos = {0.0, 1.0, 3.0, 10.0};
        g.sigma_vs = {0.1};
        g.x_star_rules.clear();
        for (double x : {5.0, 6.0, 7.0, 8.0}) g.x_star_rules.push_back(XStarRule::slope_point(x));
        g.estimators = {Estimator::Nafe, Estimator::Fe};
    } else {
        throw UsageError("unknown table '" + table + "' (t1, t2, t3, t8, custom)");
    }
    return g;
}

McConfig expand_grid(const SimGrid& g, std::size_t reps, std::uint64_t seed, unsigned threads) {
    auto need = [](bool ok, const char* flag) {
        if (!ok) throw UsageError(std::string("incomplete grid: ") + flag + " is required");
    };
    need(!g.families.empty(), "--family");
    need(!g.ns.empty(), "--n");
    need(!g.Ts.empty() || !g.rates.empty(), "--T or --rates");
    need(!g.rhos.empty(), "--rho");
    need(!g.sigma_vs.empty(), "--sigma-v");
    if (reps < 1) throw UsageError("--reps must be at least 1");

    McConfig cfg;
    for (DgpFamily family : g.families) {
        for (std::size_t n : g.ns) {
            std::vector<std::size_t> Ts = g.Ts;
            if (Ts.empty())
                for (double rate : g.rates) Ts.push_back(rate_to_T(n, rate));
            for (std::size_t T : Ts) {
                for (double rho : g.rhos) {
                    for (double sigma_v : g.sigma_vs) {
                        DgpSpec spec;
                        spec.family = family;
                        spec.n = n;
                        spec.T = T;
                        spec.rho = rho;
                        spec.sigma_v = sigma_v;
                        spec.shift = g.shift;
                        cfg.spec_grid.push_back(spec);
                    }
                }
            }
        }
    }
    cfg.estimators = g.estimators;
    cfg.taus = g.taus;
    cfg.x_star_rules = g.x_star_rules;
    cfg.reps = reps;
    cfg.seed = seed;
    cfg.max_cell_obs = g.max_cell_obs;
    cfg.threads = threads;
    try {
        cfg.check();
    } catch (const Error& e) {
        throw UsageError(std::string("invalid grid: ") + e.what());
    }
    return cfg;
}

namespace {

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
    std::vector<double> values;
    for (const auto& field : text::split_csv_line(text)) {
        auto v = text::parse_double(text::trim(field));
        if (!v || !std::isfinite(*v)) throw UsageError(flag + ": '" + field + "' is not a number");
        values.push_back(*v);
    }
    return values;
}

}  // namespace

Eigen::VectorXd parse_x_star(const std::string& spec, std::size_t K, bool has_intercept) {
    if (text::trim(spec) == "mean") return {};
    std::vector<double> v = parse_numbers(spec, "--x-star");
    if (has_intercept && v.size() + 1 == K) v.insert(v.begin(), 1.0);
    if (v.size() != K)
        throw UsageError("--x-star needs " + std::to_string(K) + " values (or " + std::to_string(K - 1) +
                         " without the intercept), got " + std::to_string(v.size()));
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

namespace {

void check_taus(const std::vector<double>& taus) {
    if (taus.empty()) throw UsageError("--tau needs at least one value");
    for (double tau : taus)
        if (!(tau > 0.0 && tau < 1.0))
            throw UsageError("--tau values must lie in the open interval (0,1); got " + text::format_double(tau));
}

std::string fmt(double v) { return std::isnan(v) ? std::string("NA") : text::format_double(v); }

json spec_json(const DgpSpec& s) {
    return {{"family", to_string(s.family)}, {"n", s.n}, {"T", s.T}, {"rho", s.rho}, {"sigma_v", s.sigma_v},
            {"shift", s.shift}};
}

fs::path manifest_path(const fs::path& out) {
    fs::path p = out;
    return p.replace_extension(".meta.json");
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
    f << contents;
    if (!f) throw DataError("failed writing '" + path.string() + "'");
}

void write_outputs(const fs::path& out, const std::string& csv, json manifest, double wall_seconds) {
    manifest["version"] = NAFE_VERSION;
    manifest["generator"] = std::string(rng::kGeneratorName);
    manifest["wall_seconds"] = wall_seconds;
    manifest["output"] = out.filename().string();
    write_file(out, csv);
    write_file(manifest_path(out), manifest.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

PanelDataset load_panel(const std::string& path) {
    if (!fs::exists(path)) throw DataError("data file '" + path + "' does not exist");
    return load_csv(path, ColumnMap::positional(read_csv_header(path)));
}

// Exit 2 on dataset-level problems, 3 on per-unit singular designs.
void check_panel(const PanelDataset& d, std::ostream& out, std::ostream& err) {
    const ValidationReport report = validate(d);
    if (!report.issues.empty()) (report.ok ? out : err) << format_report(report);
    if (report.ok) return;
    std::vector<std::string> units;
    bool global = false;
    for (const auto& issue : report.issues) {
        if (issue.severity != Severity::Error) continue;
        if (issue.scope == "global")
            global = true;
        else
            units.push_back(issue.scope);
    }
    if (global) throw DataError("dataset failed validation");
    std::string names;
    for (std::size_t j = 0; j < units.size(); ++j) names += (j ? ", " : "") + units[j];
    throw SingularDesignError("singular design in unit(s): " + names, units);
}

Eigen::VectorXd resolve_x_star(const std::string& spec, const PanelDataset& d) {
    Eigen::VectorXd x_star = parse_x_star(spec, d.K(), d.has_intercept_column());
    return x_star.size() == 0 ? column_means(d) : x_star;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct EstimateArgs {
    std::string data, x_star = "mean", se, out;
    std::vector<double> taus;
    std::vector<std::string> methods{"nafe"};
    std::size_t B = 200;
    std::uint64_t seed = 42;
    unsigned threads = 0;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    check_taus(a.taus);
    std::vector<Estimator> methods;
    for (const auto& m : a.methods) {
        try {
            methods.push_back(parse_estimator(m));
        } catch (const DomainError& e) {
            throw UsageError(std::string("--method: ") + e.what());
        }
    }
    if (!a.se.empty() && a.se != "bootstrap") throw UsageError("--se accepts only 'bootstrap'");
    if (!a.se.empty() && a.B < 2) throw UsageError("--B must be at least 2");
    out << "seed: " << a.seed << "\n";

    const PanelDataset d = load_panel(a.data);
    check_panel(d, out, err);
    const Eigen::VectorXd x_star = resolve_x_star(a.x_star, d);
    const auto& names = d.regressor_names();

    std::ostringstream csv;
    csv << "method,tau,coefficient,estimate,se\n";
    std::ostringstream summary;
    summary << std::left << std::setw(8) << "method" << std::setw(8) << "tau" << std::setw(20) << "coefficient"
            << std::setw(14) << "estimate" << "se\n";
    auto row = [&](const std::string& method, const std::string& tau, const std::string& coef, double est,
                   double se) {
        csv << method << ',' << tau << ',' << coef << ',' << fmt(est) << ',' << fmt(se) << '\n';
        summary << std::setw(8) << method << std::setw(8) << tau << std::setw(20) << coef << std::setw(14)
                << std::setprecision(6) << est << (std::isnan(se) ? std::string("-") : fmt(se)) << '\n';
    };
    const double na = std::numeric_limits<double>::quiet_NaN();
    json manifest;
    for (Estimator m : methods) {
        if (m == Estimator::Nafe) {
            const auto fits = fit_all_units(d, a.threads);
            const RankedPath path = coefficient_path(fits, x_star);
            std::optional<BootstrapResult> boot;
            if (!a.se.empty()) boot = bootstrap_se(d, a.taus, x_star, a.B, a.seed, a.threads);
            for (std::size_t j = 0; j < a.taus.size(); ++j) {
                const Eigen::VectorXd beta = beta_at(path, a.taus[j]);
                for (std::size_t k = 0; k < d.K(); ++k)
                    row("nafe", fmt(a.taus[j]), names[k], beta(static_cast<Eigen::Index>(k)),
                        boot ? boot->se(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) : na);
            }
            if (boot) manifest["bootstrap"] = {{"B", a.B}, {"failed_replicates", boot->failed_replicates}};
        } else if (m == Estimator::Feqr) {
            for (double tau : a.taus) {
                const Eigen::VectorXd b = canay_feqr(d, tau);
                for (Eigen::Index k = 0; k < b.size(); ++k)
                    row("feqr", fmt(tau), names[static_cast<std::size_t>(k + 1)], b(k), na);
            }
        } else {
            const Eigen::VectorXd b = within_fe(d).slopes;
            for (Eigen::Index k = 0; k < b.size(); ++k)
                row("fe", "NA", names[static_cast<std::size_t>(k + 1)], b(k), na);
        }
    }
    manifest["subcommand"] = "estimate";
    manifest["seed"] = a.seed;
    manifest["data"] = a.data;
    manifest["n"] = d.n();
    manifest["T"] = d.T();
    manifest["regressors"] = names;
    manifest["tau"] = a.taus;
    manifest["methods"] = a.methods;
    manifest["x_star"] = to_vector(x_star);
    manifest["x_star_rule"] = a.x_star;
    write_outputs(a.out, csv.str(), manifest, seconds_since(start));
    out << "panel: n = " << d.n() << ", T = " << d.T() << ", K = " << d.K() << "\n";
    out << summary.str() << "wrote " << a.out << "\n";
    return kExitOk;
}

int cmd_bootstrap(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    check_taus(a.taus);
    if (a.B < 2) throw UsageError("--B must be at least 2");
    out << "seed: " << a.seed << "\n";
    const PanelDataset d = load_panel(a.data);
    check_panel(d, out, err);
    const Eigen::VectorXd x_star = resolve_x_star(a.x_star, d);
    const BootstrapResult r = bootstrap_se(d, a.taus, x_star, a.B, a.seed, a.threads);
    std::ostringstream csv;
    write_bootstrap_csv(r, d.regressor_names(), csv);
    json manifest = {{"subcommand", "bootstrap"}, {"seed", a.seed},           {"data", a.data},
                     {"B", a.B},                  {"tau", a.taus},            {"x_star", to_vector(x_star)},
                     {"x_star_rule", a.x_star},   {"failed_replicates", r.failed_replicates}};
    write_outputs(a.out, csv.str(), manifest, seconds_since(start));
    out << "bootstrap: B = " << a.B << ", failed replicates = " << r.failed_replicates << "\n";
    for (std::size_t j = 0; j < a.taus.size(); ++j)
        for (std::size_t k = 0; k < r.K; ++k)
            out << "  tau " << fmt(a.taus[j]) << "  " << d.regressor_names()[k] << "  se "
                << fmt(r.se(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) << "\n";
    out << "wrote " << a.out << "\n";
    return kExitOk;
}

struct SimulateArgs {
    std::string table, out, family;
    std::size_t reps = 500;
    std::uint64_t seed = 42;
    unsigned threads = 0;
    std::vector<std::size_t> ns, Ts;
    std::vector<double> rates, rhos, sigma_vs, taus;
    std::vector<std::string> x_stars, estimators;
    std::optional<double> shift;
    std::optional<std::size_t> max_cell_obs;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    if (a.reps < 1) throw UsageError("--reps must be at least 1");
    SimGrid g = preset_grid(a.table);
    if (!a.family.empty()) {
        try {
            g.families = {parse_family(a.family)};
        } catch (const DomainError& e) {
            throw UsageError(std::string("--family: ") + e.what());
        }
    }
    if (!a.ns.empty()) g.ns = a.ns;
    if (!a.Ts.empty()) {
        g.Ts = a.Ts;
        g.rates.clear();
    }
    if (!a.rates.empty()) {
        g.rates = a.rates;
        g.Ts.clear();
    }
    if (!a.rhos.empty()) g.rhos = a.rhos;
    if (!a.sigma_vs.empty()) g.sigma_vs = a.sigma_vs;
    if (!a.taus.empty()) {
        check_taus(a.taus);
        g.taus = a.taus;
    }
    if (!a.x_stars.empty()) {
        g.x_star_rules.clear();
        for (const auto& x : a.x_stars) {
            if (text::trim(x) == "mean") {
                g.x_star_rules.push_back(XStarRule::mean());
                continue;
            }
            auto v = text::parse_double(text::trim(x));
            if (!v) throw UsageError("--x-star: '" + x + "' is neither 'mean' nor a number");
            g.x_star_rules.push_back(XStarRule::slope_point(*v));
        }
    }
    if (!a.estimators.empty()) {
        g.estimators.clear();
        for (const auto& e : a.estimators) {
            try {
                g.estimators.push_back(parse_estimator(e));
            } catch (const DomainError& ex) {
                throw UsageError(std::string("--estimators: ") + ex.what());
            }
        }
    }
    if (a.shift) g.shift = *a.shift;
    if (a.max_cell_obs) g.max_cell_obs = *a.max_cell_obs;
    const McConfig cfg = expand_grid(g, a.reps, a.seed, a.threads);

    out << "seed: " << a.seed << "\n";
    const McResult r = run_mc(cfg);
    std::ostringstream csv;
    write_mc_csv(r, csv);

    json grid = json::array();
    for (const auto& s : cfg.spec_grid) grid.push_back(spec_json(s));
    json rules = json::array();
    for (const auto& x : cfg.x_star_rules) rules.push_back(x.label());
    json ests = json::array();
    for (Estimator e : cfg.estimators) ests.push_back(to_string(e));
    std::size_t skipped = 0, invalid = 0;
    for (const auto& c : r.cells) {
        skipped += c.skipped;
        invalid += !c.skipped && !c.valid;
    }
    json manifest = {{"subcommand", "simulate"}, {"table", a.table},    {"seed", a.seed},
                     {"reps", a.reps},           {"grid", grid},        {"tau", cfg.taus},
                     {"x_star", rules},          {"estimators", ests},  {"max_cell_obs", cfg.max_cell_obs},
                     {"notes", r.notes},         {"skipped_cells", skipped}, {"invalid_cells", invalid}};
    write_outputs(a.out, csv.str(), manifest, r.wall_seconds);

    out << "designs: " << cfg.spec_grid.size() << ", cells: " << r.cells.size() << " (" << skipped
        << " over the cell budget, " << invalid << " with more than 10% failed replicates)\n";
    for (const auto& note : r.notes) out << "note: " << note << "\n";
    out << std::fixed << std::setprecision(1) << "wall time: " << r.wall_seconds << " s\n"
        << std::defaultfloat << "wrote " << a.out << "\n";
    return kExitOk;
}

struct ProbeArgs {
    std::string which, out;
    std::vector<std::size_t> ns, Ts;
    std::vector<double> taus, rates;
    std::size_t reps = 0;
    std::size_t points = 10;
    double slope = 4.5;
    double rho = 1.0;
    double sigma_v = 0.0;
    std::uint64_t seed = 42;
    unsigned threads = 0;
};

template <class F>
auto domain_as_usage(F&& f) {
    try {
        return f();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    } catch (const DimensionError& e) {
        throw UsageError(e.what());
    }
}

int cmd_probe(const ProbeArgs& a, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    if (a.which != "identification" && a.which != "permutation" && a.which != "spacing")
        throw UsageError("unknown probe '" + a.which + "' (identification, permutation, spacing)");
    if (!std::isfinite(a.slope) || a.slope < 0.0) throw UsageError("--x-star must be a nonnegative number");
    out << "seed: " << a.seed << "\n";
    std::ostringstream csv;
    json manifest = {{"subcommand", "probe"}, {"which", a.which}, {"seed", a.seed}, {"x_star", a.slope}};
    const Eigen::Vector2d x_star(1.0, a.slope);

    if (a.which == "identification") {
        std::vector<double> taus = a.taus;
        if (taus.empty())
            for (int j = 1; j <= 9; ++j) taus.push_back(j / 10.0);
        check_taus(taus);
        const std::size_t n = a.ns.empty() ? 10000 : a.ns.front();
        if (a.ns.size() > 1) throw UsageError("identification probe takes a single --n");
        DgpSpec spec;
        const auto p = domain_as_usage([&] { return identification_probe(n, taus, spec, a.seed, x_star); });
        csv << "n,tau,p_hat,abs_error,tolerance,within\n";
        double worst = 0.0;
        for (std::size_t j = 0; j < taus.size(); ++j) {
            const double err = std::abs(p[j] - taus[j]);
            const double tol = 3.0 * std::sqrt(taus[j] * (1.0 - taus[j]) / static_cast<double>(n));
            worst = std::max(worst, err);
            csv << n << ',' << fmt(taus[j]) << ',' << fmt(p[j]) << ',' << fmt(err) << ',' << fmt(tol) << ','
                << (err <= tol ? 1 : 0) << '\n';
            out << "tau " << fmt(taus[j]) << ": p_hat = " << fmt(p[j]) << ", |p_hat - tau| = " << fmt(err)
                << (err <= tol ? "" : "  (outside 3 SE)") << "\n";
        }
        out << "max |p_hat - tau| = " << fmt(worst) << "\n";
        manifest["n"] = n;
        manifest["tau"] = taus;
    } else if (a.which == "permutation") {
        const std::size_t reps = a.reps == 0 ? 100 : a.reps;
        std::vector<RecoveryPoint> grid;
        const std::vector<std::size_t> ns = a.ns.empty() ? std::vector<std::size_t>{100, 1000} : a.ns;
        for (std::size_t n : ns) {
            if (!a.Ts.empty())
                for (std::size_t T : a.Ts) grid.push_back({n, 0.0, T});
            else
                for (double rate : a.rates.empty() ? std::vector<double>{0.25, 0.5} : a.rates)
                    grid.push_back({n, rate, 0});
        }
        DgpSpec base;
        base.rho = a.rho;
        base.sigma_v = a.sigma_v;
        const auto cells = domain_as_usage(
            [&] { return permutation_recovery_probe(grid, reps, a.seed, base, x_star, a.threads); });
        csv << "n,T,rate,reps,recovered,frequency\n";
        for (const auto& c : cells) {
            csv << c.n << ',' << c.T << ',' << (c.rate > 0 ? fmt(c.rate) : "NA") << ',' << c.reps << ','
                << c.recovered << ',' << fmt(c.frequency) << '\n';
            out << "n " << c.n << ", T " << c.T << ": exact order recovered in " << c.recovered << "/" << c.reps
                << "\n";
        }
        manifest["reps"] = reps;
        manifest["rho"] = a.rho;
        manifest["sigma_v"] = a.sigma_v;
        manifest["n"] = ns;
    } else {
        const std::size_t reps = a.reps == 0 ? 100000 : a.reps;
        const std::vector<std::size_t> ns = a.ns.empty() ? std::vector<std::size_t>{10, 20, 50} : a.ns;
        csv << "n,x,empirical,bound,se,empirical_le_bound\n";
        for (std::size_t g = 0; g < ns.size(); ++g) {
            const std::size_t n = ns[g];
            const auto points = domain_as_usage([&] {
                const auto grid = spacing_grid(n, a.points);
                return spacing_bound_probe(n, grid, reps, rng::derive_seed(a.seed, g, 0), a.slope, a.threads);
            });
            std::size_t above = 0;
            for (const auto& p : points) {
                const bool le = p.empirical <= p.bound;
                above += !le;
                csv << n << ',' << fmt(p.x) << ',' << fmt(p.empirical) << ',' << fmt(p.bound) << ','
                    << fmt(p.standard_error()) << ',' << (le ? 1 : 0) << '\n';
            }
            out << "n " << n << ": " << points.size() - above << "/" << points.size()
                << " grid points with empirical <= bound\n";
        }
        manifest["reps"] = reps;
        manifest["n"] = ns;
        manifest["points"] = a.points;
    }
    write_outputs(a.out, csv.str(), manifest, seconds_since(start));
    out << "wrote " << a.out << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonadditive fixed-effects panel estimation and simulation", "nafe"};
    app.set_version_flag("--version", NAFE_VERSION);
    app.require_subcommand(1);

    auto threads_opt = [](CLI::App* sub, unsigned& threads) {
        sub->add_option("--threads", threads, "Worker threads, 0 = all cores (results do not depend on it)")
            ->capture_default_str();
    };

    EstimateArgs est;
    auto* e = app.add_subcommand("estimate", "Estimate coefficients on a panel CSV (unit,time,y,x1,...)");
    e->add_option("--data", est.data, "Panel CSV: unit, time, outcome, then regressors")->required();
    e->add_option("--tau", est.taus, "Comma-separated quantile levels in (0,1)")->required()->delimiter(',');
    e->add_option("--x-star", est.x_star, "Sorting point: 'mean' or comma-separated values")->capture_default_str();
    e->add_option("--method", est.methods, "Comma-separated methods: nafe, feqr, fe")
        ->delimiter(',')
        ->capture_default_str();
    e->add_option("--se", est.se, "Standard errors for nafe: 'bootstrap'");
    e->add_option("--B", est.B, "Bootstrap replicates")->capture_default_str();
    e->add_option("--seed", est.seed, "Random seed")->capture_default_str();
    e->add_option("--out", est.out, "Output CSV path")->required();
    threads_opt(e, est.threads);

    EstimateArgs boot;
    auto* b = app.add_subcommand("bootstrap", "Bootstrap standard errors of the nafe coefficients");
    b->add_option("--data", boot.data, "Panel CSV: unit, time, outcome, then regressors")->required();
    b->add_option("--tau", boot.taus, "Comma-separated quantile levels in (0,1)")->required()->delimiter(',');
    b->add_option("--x-star", boot.x_star, "Sorting point: 'mean' or comma-separated values")->capture_default_str();
    b->add_option("--B", boot.B, "Bootstrap replicates")->capture_default_str();
    b->add_option("--seed", boot.seed, "Random seed")->capture_default_str();
    b->add_option("--out", boot.out, "Output CSV path")->required();
    threads_opt(b, boot.threads);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Monte Carlo bias/MSE tables");
    s->add_option("--table", sim.table, "Preset: t1, t2, t3, t8 or custom")->required();
    s->add_option("--reps", sim.reps, "Replications per design")->capture_default_str();
    s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    s->add_option("--out", sim.out, "Output CSV path")->required();
    s->add_option("--family", sim.family, "Grid override: baseline, rank_mixture or multiplicative");
    s->add_option("--n", sim.ns, "Grid override: comma-separated n values")->delimiter(',');
    s->add_option("--T", sim.Ts, "Grid override: comma-separated T values")->delimiter(',');
    s->add_option("--rates", sim.rates, "Grid override: T = round(n^rate) for each rate")->delimiter(',');
    s->add_option("--rho", sim.rhos, "Grid override: comma-separated rho values")->delimiter(',');
    s->add_option("--sigma-v", sim.sigma_vs, "Grid override: comma-separated sigma_v values")->delimiter(',');
    s->add_option("--tau", sim.taus, "Grid override: comma-separated quantile levels")->delimiter(',');
    s->add_option("--x-star", sim.x_stars, "Grid override: slope sorting points, or 'mean'")->delimiter(',');
    s->add_option("--estimators", sim.estimators, "Grid override: nafe, feqr, fe")->delimiter(',');
    s->add_option("--shift", sim.shift, "Grid override: regressor location shift");
    s->add_option("--max-cell-obs", sim.max_cell_obs, "Skip designs with n*T above this (default 1000000)");
    threads_opt(s, sim.threads);

    ProbeArgs pr;
    auto* p = app.add_subcommand("probe", "Identification, permutation-recovery and spacing probes");
    p->add_option("--which", pr.which, "identification, permutation or spacing")->required();
    p->add_option("--n", pr.ns, "Cross-section sizes (identification: one value)")->delimiter(',');
    p->add_option("--tau", pr.taus, "identification: quantile levels (default 0.1,...,0.9)")->delimiter(',');
    p->add_option("--T", pr.Ts, "permutation: time lengths")->delimiter(',');
    p->add_option("--rates", pr.rates, "permutation: T = round(n^rate) (default 0.25,0.5)")->delimiter(',');
    p->add_option("--rho", pr.rho, "permutation: regressor-rank dependence")->capture_default_str();
    p->add_option("--sigma-v", pr.sigma_v, "permutation: noise scale")->capture_default_str();
    p->add_option("--reps", pr.reps, "Replications (permutation 100, spacing 100000 by default)");
    p->add_option("--points", pr.points, "spacing: grid points on [0, 1/(n+1)]")->capture_default_str();
    p->add_option("--x-star", pr.slope, "Slope sorting point x1*")->capture_default_str();
    p->add_option("--seed", pr.seed, "Random seed")->capture_default_str();
    p->add_option("--out", pr.out, "Output CSV path")->required();
    threads_opt(p, pr.threads);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        app.exit(ex, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& ex) {
        app.exit(ex, out, err);
        return kExitOk;
    } catch (const CLI::CallForVersion& ex) {
        app.exit(ex, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return kExitUsage;
    }

    try {
        if (*e) return cmd_estimate(est, out, err);
        if (*b) return cmd_bootstrap(boot, out, err);
        if (*s) return cmd_simulate(sim, out);
        return cmd_probe(pr, out);
    } catch (const UsageError& ex) {
        err << "usage error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const DataError& ex) {
        err << "data error: " << ex.what() << "\n";
        return kExitData;
    } catch (const NumericalError& ex) {
        err << "numerical failure: " << ex.what() << "\n";
        return kExitNumerical;
    } catch (const DomainError& ex) {
        err << "usage error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const DimensionError& ex) {
        err << "usage error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& ex) {
        err << "data error: " << ex.what() << "\n";
        return kExitData;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("nafe");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : storage) argv.push_back(a.data());
    argv.push_back(nullptr);
    return run(static_cast<int>(storage.size()), argv.data(), out, err);
}

}  // namespace nafe::cli
