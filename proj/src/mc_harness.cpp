#include "nafe/mc_harness.hpp"

#include "nafe/errors.hpp"
#include "nafe/estimators.hpp"
#include "nafe/parallel.hpp"
#include "nafe/rng.hpp"
#include "nafe/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace nafe {

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::Nafe: return "nafe";
        case Estimator::Feqr: return "feqr";
        case Estimator::Fe: return "fe";
    }
    return "unknown";
}

Estimator parse_estimator(const std::string& name) {
    if (name == "nafe") return Estimator::Nafe;
    if (name == "feqr") return Estimator::Feqr;
    if (name == "fe") return Estimator::Fe;
    throw DomainError("unknown estimator '" + name + "' (nafe, feqr, fe)");
}

std::string XStarRule::label() const {
    if (kind == Kind::Mean) return "mean";
    std::string out;
    for (Eigen::Index k = 1; k < value.size(); ++k) {
        if (k > 1) out += ';';
        out += text::format_double(value(k));
    }
    return out.empty() && value.size() == 1 ? text::format_double(value(0)) : out;
}

void McConfig::check() const {
    if (spec_grid.empty()) throw DomainError("simulation grid is empty");
    if (reps < 1) throw DomainError("reps must be at least 1");
    if (estimators.empty()) throw DomainError("no estimators selected");
    if (taus.empty()) throw DomainError("no tau values given");
    for (double tau : taus)
        if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in the open interval (0,1)");
    bool needs_x_star = std::find(estimators.begin(), estimators.end(), Estimator::Nafe) != estimators.end();
    if (needs_x_star && x_star_rules.empty()) throw DomainError("no sorting point given");
    for (const auto& rule : x_star_rules)
        if (rule.kind == XStarRule::Kind::Fixed && rule.value.size() != 2)
            throw DimensionError("simulation sorting points must have length 2 (intercept, x1)");
    for (const auto& spec : spec_grid) spec.check();
}

const McCell* McResult::find(std::size_t spec_index, Estimator e, std::optional<double> tau,
                             std::size_t coefficient, const std::string& x_star) const {
    for (const auto& cell : cells) {
        if (cell.spec_index == spec_index && cell.estimator == e && cell.coefficient_index == coefficient &&
            cell.x_star == x_star && cell.tau.has_value() == tau.has_value() &&
            (!tau || std::abs(*cell.tau - *tau) < 1e-12))
            return &cell;
    }
    return nullptr;
}

std::size_t rate_to_T(std::size_t n, double rate) {
    if (n < 1) throw DomainError("rate_to_T needs n >= 1");
    if (!(rate > 0.0)) throw DomainError("rate must be positive");
    double t = std::round(std::pow(static_cast<double>(n), rate));
    return std::max<std::size_t>(2, static_cast<std::size_t>(t));
}

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) {
        double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct Slot {
    Estimator estimator;
    std::size_t x_star_index;  // nafe only
    std::size_t tau_index;     // nafe / feqr
    std::size_t coefficient;
};

std::vector<Slot> slots_for(const McConfig& cfg) {
    std::vector<Slot> slots;
    for (Estimator e : cfg.estimators) {
        switch (e) {
            case Estimator::Nafe:
                for (std::size_t x = 0; x < cfg.x_star_rules.size(); ++x)
                    for (std::size_t j = 0; j < cfg.taus.size(); ++j)
                        for (std::size_t k = 0; k < 2; ++k) slots.push_back({e, x, j, k});
                break;
            case Estimator::Feqr:
                for (std::size_t j = 0; j < cfg.taus.size(); ++j) slots.push_back({e, 0, j, 1});
                break;
            case Estimator::Fe: slots.push_back({e, 0, 0, 1}); break;
        }
    }
    return slots;
}

double slot_truth(const McConfig& cfg, const Slot& slot) {
    if (slot.estimator == Estimator::Fe) return DrawTruth::fe_target;
    double tau = cfg.taus[slot.tau_index];
    return slot.coefficient == 0 ? beta0_true(tau) : beta1_true(tau);
}

// Errors (estimate - truth) of every slot for one replicate; NaN where the
// estimator failed.
void replicate_errors(const McConfig& cfg, const std::vector<Slot>& slots, const DgpSpec& spec, std::uint64_t seed,
                      double* out) {
    const DgpDraw draw = sample(spec, seed);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<RankedPath> paths;
    bool nafe_ok = false;
    std::optional<Eigen::VectorXd> fe_slope;
    std::vector<std::optional<double>> feqr(cfg.taus.size());
    for (Estimator e : cfg.estimators) {
        try {
            if (e == Estimator::Nafe) {
                const auto fits = fit_all_units(draw.data);
                for (const auto& rule : cfg.x_star_rules) {
                    Eigen::VectorXd x_star =
                        rule.kind == XStarRule::Kind::Mean ? column_means(draw.data) : rule.value;
                    paths.push_back(coefficient_path(fits, x_star));
                }
                nafe_ok = true;
            } else if (e == Estimator::Fe) {
                fe_slope = within_fe(draw.data).slopes;
            } else {
                for (std::size_t j = 0; j < cfg.taus.size(); ++j) {
                    try {
                        feqr[j] = canay_feqr(draw.data, cfg.taus[j])(0);
                    } catch (const NumericalError&) {
                    }
                }
            }
        } catch (const NumericalError&) {
        }
    }
    for (std::size_t s = 0; s < slots.size(); ++s) {
        const Slot& slot = slots[s];
        double estimate = nan;
        switch (slot.estimator) {
            case Estimator::Nafe:
                if (nafe_ok)
                    estimate = beta_at(paths[slot.x_star_index], cfg.taus[slot.tau_index])(
                        static_cast<Eigen::Index>(slot.coefficient));
                break;
            case Estimator::Feqr:
                if (feqr[slot.tau_index]) estimate = *feqr[slot.tau_index];
                break;
            case Estimator::Fe:
                if (fe_slope) estimate = (*fe_slope)(0);
                break;
        }
        out[s] = estimate - slot_truth(cfg, slot);
    }
}

}  // namespace

McResult run_mc(const McConfig& cfg) {
    cfg.check();
    const auto start = std::chrono::steady_clock::now();
    const std::vector<Slot> slots = slots_for(cfg);
    const std::size_t n_specs = cfg.spec_grid.size(), reps = cfg.reps, width = slots.size();

    std::vector<char> skipped(n_specs, 0);
    std::vector<std::size_t> jobs;  // spec indices that run
    for (std::size_t s = 0; s < n_specs; ++s) {
        const auto& spec = cfg.spec_grid[s];
        if (spec.n * spec.T > cfg.max_cell_obs)
            skipped[s] = 1;
        else
            jobs.push_back(s);
    }

    // errors[s] holds reps x width values, row r = replicate r.
    std::vector<std::vector<double>> errors(n_specs);
    for (std::size_t s : jobs) errors[s].assign(reps * width, std::numeric_limits<double>::quiet_NaN());
    parallel_for(jobs.size() * reps, cfg.threads, [&](std::size_t job) {
        const std::size_t s = jobs[job / reps], r = job % reps;
        replicate_errors(cfg, slots, cfg.spec_grid[s], rng::derive_seed(cfg.seed, s, r), &errors[s][r * width]);
    });

    McResult result;
    result.seed = cfg.seed;
    result.reps = reps;
    for (std::size_t s = 0; s < n_specs; ++s) {
        for (std::size_t c = 0; c < width; ++c) {
            const Slot& slot = slots[c];
            McCell cell;
            cell.spec_index = s;
            cell.spec = cfg.spec_grid[s];
            cell.estimator = slot.estimator;
            cell.x_star = slot.estimator == Estimator::Nafe ? cfg.x_star_rules[slot.x_star_index].label() : "NA";
            if (slot.estimator != Estimator::Fe) cell.tau = cfg.taus[slot.tau_index];
            cell.coefficient_index = slot.coefficient;
            cell.coefficient = slot.coefficient == 0 ? kInterceptName : "x1";
            cell.truth_constant = slot_truth(cfg, slot);
            if (skipped[s]) {
                cell.skipped = true;
                cell.valid = false;
                cell.bias = cell.mse = std::numeric_limits<double>::quiet_NaN();
                result.cells.push_back(cell);
                continue;
            }
            CompensatedSum sum, sum_sq;
            for (std::size_t r = 0; r < reps; ++r) {
                double e = errors[s][r * width + c];
                if (std::isnan(e)) continue;
                sum.add(e);
                sum_sq.add(e * e);
                ++cell.reps_used;
            }
            cell.failures = reps - cell.reps_used;
            cell.valid = 10 * cell.failures <= reps && cell.reps_used > 0;
            if (cell.reps_used > 0) {
                const double m = static_cast<double>(cell.reps_used);
                cell.bias = sum.value() / m;
                cell.mse = sum_sq.value() / m;
            } else {
                cell.bias = cell.mse = std::numeric_limits<double>::quiet_NaN();
            }
            result.cells.push_back(cell);
        }
    }
    if (std::find(cfg.estimators.begin(), cfg.estimators.end(), Estimator::Fe) != cfg.estimators.end()) {
        for (const auto& spec : cfg.spec_grid) {
            if (spec.family != DgpFamily::Multiplicative) {
                result.notes.push_back("fe slope compared against E[U^2] = 1/3 for the " + to_string(spec.family) +
                                       " family as well as the multiplicative one");
                break;
            }
        }
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

void write_mc_csv(const McResult& result, std::ostream& out) {
    out << "family,n,T,rho,sigma_v,x_star,estimator,tau,coefficient,bias,mse,reps_used,seed\n";
    auto num = [](double v) { return std::isnan(v) ? std::string("NA") : text::format_double(v); };
    for (const auto& c : result.cells) {
        out << to_string(c.spec.family) << ',' << c.spec.n << ',' << c.spec.T << ',' << num(c.spec.rho) << ','
            << num(c.spec.sigma_v) << ',' << c.x_star << ',' << to_string(c.estimator) << ','
            << (c.tau ? num(*c.tau) : "NA") << ',' << c.coefficient << ',' << num(c.bias) << ',' << num(c.mse)
            << ',' << c.reps_used << ',' << result.seed << '\n';
    }
}

std::vector<double> identification_probe(std::size_t n, const std::vector<double>& taus, const DgpSpec& spec,
                                         std::uint64_t seed, const Eigen::VectorXd& x_star) {
    if (spec.family != DgpFamily::Baseline) throw DomainError("identification probe uses the baseline family");
    if (n < 1) throw DomainError("identification probe needs n >= 1");
    if (x_star.size() != 2) throw DimensionError("identification probe sorting point must be (1, x1)");
    const rng::CounterRng ranks(seed, rng::Stream::Probe);
    auto y_star = [&](double u) { return x_star(0) * beta0_true(u) + x_star(1) * beta1_true(u); };
    std::vector<double> draws(n);
    for (std::size_t i = 0; i < n; ++i) draws[i] = y_star(ranks.uniform(i, 0));
    std::vector<double> out;
    for (double tau : taus) {
        if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in the open interval (0,1)");
        const double threshold = y_star(tau);
        auto hits = std::count_if(draws.begin(), draws.end(), [&](double v) { return v <= threshold; });
        out.push_back(static_cast<double>(hits) / static_cast<double>(n));
    }
    return out;
}

std::vector<RecoveryCell> permutation_recovery_probe(const std::vector<RecoveryPoint>& grid, std::size_t reps,
                                                     std::uint64_t seed, const DgpSpec& base,
                                                     const Eigen::VectorXd& x_star, unsigned threads) {
    if (base.family != DgpFamily::Baseline) throw DomainError("permutation probe uses the baseline family");
    if (reps < 1) throw DomainError("reps must be at least 1");
    std::vector<RecoveryCell> cells;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        DgpSpec spec = base;
        spec.n = grid[g].n;
        spec.T = grid[g].T > 0 ? grid[g].T : rate_to_T(grid[g].n, grid[g].rate);
        spec.check();
        std::vector<char> hit(reps, 0);
        parallel_for(reps, threads, [&](std::size_t r) {
            const DgpDraw draw = sample_baseline(spec, rng::derive_seed(seed, g, r));
            try {
                const auto fits = fit_all_units(draw.data);
                const RankedPath path = coefficient_path(fits, x_star);
                Eigen::VectorXd truth(draw.truth.u.size());
                for (Eigen::Index i = 0; i < truth.size(); ++i)
                    truth(i) = x_star(0) * beta0_true(draw.truth.u(i)) + x_star(1) * beta1_true(draw.truth.u(i));
                hit[r] = path.sigma_hat == rank_permutation(truth);
            } catch (const NumericalError&) {
            }
        });
        RecoveryCell cell;
        cell.n = spec.n;
        cell.T = spec.T;
        cell.rate = grid[g].T > 0 ? 0.0 : grid[g].rate;
        cell.reps = reps;
        cell.recovered = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
        cell.frequency = static_cast<double>(cell.recovered) / static_cast<double>(reps);
        cells.push_back(cell);
    }
    return cells;
}

double SpacingPoint::standard_error() const {
    return std::sqrt(empirical * (1.0 - empirical) / static_cast<double>(reps));
}

double spacing_bound(std::size_t n, double x, double lower_derivative) {
    const double limit = lower_derivative / static_cast<double>(n + 1);
    if (x <= 0.0) return 0.0;
    if (x > limit * (1.0 + 1e-12)) throw DomainError("spacing bound is defined for x in [0, L/(n+1)]");
    const double base = std::max(0.0, 1.0 - static_cast<double>(n + 1) * x / lower_derivative);
    return 1.0 - std::pow(base, static_cast<double>(n));
}

std::vector<double> spacing_grid(std::size_t n, std::size_t points, double lower_derivative) {
    if (points < 2) throw DomainError("spacing grid needs at least 2 points");
    const double limit = lower_derivative / static_cast<double>(n + 1);
    std::vector<double> grid(points);
    for (std::size_t j = 0; j < points; ++j)
        grid[j] = limit * static_cast<double>(j) / static_cast<double>(points - 1);
    grid.back() = limit;
    return grid;
}

std::vector<SpacingPoint> spacing_bound_probe(std::size_t n, const std::vector<double>& x_grid, std::size_t reps,
                                              std::uint64_t seed, double slope_point, unsigned threads) {
    if (n < 2) throw DomainError("spacing probe needs n >= 2");
    if (reps < 1) throw DomainError("reps must be at least 1");
    if (!(slope_point >= 0.0)) throw DomainError("spacing probe needs a nonnegative sorting point");
    constexpr double lower_derivative = 1.0;  // d/du (u + c u^2) = 1 + 2cu >= 1
    const double limit = lower_derivative / static_cast<double>(n + 1);
    for (double x : x_grid)
        if (!(x >= 0.0) || x > limit * (1.0 + 1e-12))
            throw DomainError("spacing probe x values must lie in [0, L/(n+1)] = [0, " + text::format_double(limit) +
                              "]");

    const rng::CounterRng ranks(seed, rng::Stream::Probe);
    std::vector<double> min_gap(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = ranks.uniform(r, static_cast<std::uint32_t>(i));
            y[i] = beta0_true(u) + slope_point * beta1_true(u);
        }
        std::sort(y.begin(), y.end());
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < n; ++i) gap = std::min(gap, y[i] - y[i - 1]);
        min_gap[r] = gap;
    });
    std::vector<SpacingPoint> out;
    for (double x : x_grid) {
        SpacingPoint p;
        p.x = x;
        p.reps = reps;
        auto hits = std::count_if(min_gap.begin(), min_gap.end(), [&](double g) { return g <= x; });
        p.empirical = static_cast<double>(hits) / static_cast<double>(reps);
        p.bound = spacing_bound(n, std::min(x, limit), lower_derivative);
        out.push_back(p);
    }
    return out;
}

}  // namespace nafe
