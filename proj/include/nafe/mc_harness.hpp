#pragma once

#include "nafe/dgp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nafe {

enum class Estimator { Nafe, Feqr, Fe };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

/// Sorting point: the per-draw column mean, or a fixed K-vector.
struct XStarRule {
    enum class Kind { Mean, Fixed } kind = Kind::Mean;
    Eigen::VectorXd value;

    static XStarRule mean() { return {}; }
    static XStarRule fixed(Eigen::VectorXd v) { return {Kind::Fixed, std::move(v)}; }
    /// Fixed (1, slope) for the single-regressor simulation designs.
    static XStarRule slope_point(double x1) { return fixed(Eigen::Vector2d(1.0, x1)); }

    /// "mean", or the non-intercept entries joined by ';'.
    std::string label() const;
};

struct McConfig {
    std::vector<DgpSpec> spec_grid;
    std::vector<Estimator> estimators{Estimator::Nafe};
    std::vector<double> taus{0.25, 0.5, 0.75};
    std::vector<XStarRule> x_star_rules{XStarRule::slope_point(4.5)};
    std::size_t reps = 500;
    std::uint64_t seed = 42;
    /// Cells with n*T above this are skipped and reported with NA.
    std::size_t max_cell_obs = 1'000'000;
    unsigned threads = 0;

    /// Throws DomainError on an empty grid, reps == 0 or tau outside (0,1).
    void check() const;
};

/// One output row: bias and MSE of one coefficient for one estimator.
struct McCell {
    std::size_t spec_index = 0;
    DgpSpec spec;
    Estimator estimator = Estimator::Nafe;
    std::string x_star;                 // rule label; "NA" for feqr and fe
    std::optional<double> tau;          // empty for fe
    std::string coefficient;
    std::size_t coefficient_index = 0;
    double truth_constant = 0.0;        // fe only
    double bias = 0.0;
    double mse = 0.0;
    std::size_t reps_used = 0;
    std::size_t failures = 0;
    bool skipped = false;               // over the cell budget
    bool valid = true;                  // failures <= 10% of reps
};

struct McResult {
    std::vector<McCell> cells;
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    double wall_seconds = 0.0;
    /// Explanatory notes for the manifest (e.g. FE target generalisation).
    std::vector<std::string> notes;

    const McCell* find(std::size_t spec_index, Estimator e, std::optional<double> tau, std::size_t coefficient,
                       const std::string& x_star = "NA") const;
};

/// T = round(n^rate), at least 2.
std::size_t rate_to_T(std::size_t n, double rate);

/// Replicate r of grid entry s draws its panel with seed
/// derive_seed(cfg.seed, s, r), shared by every estimator, tau and x*.
/// Truth: beta_k(tau) (tau for the intercept, tau^2 for the slope) for nafe
/// and feqr; E[U^2] = 1/3 for the fe slope.
McResult run_mc(const McConfig& cfg);

/// CSV: family,n,T,rho,sigma_v,x_star,estimator,tau,coefficient,bias,mse,reps_used,seed
void write_mc_csv(const McResult& result, std::ostream& out);

/// Empirical P(x*'beta(U_i) <= x*'beta(tau)) over n fresh rank draws, per tau.
std::vector<double> identification_probe(std::size_t n, const std::vector<double>& taus, const DgpSpec& spec,
                                         std::uint64_t seed, const Eigen::VectorXd& x_star = Eigen::Vector2d(1.0, 4.5));

struct RecoveryCell {
    std::size_t n = 0;
    std::size_t T = 0;
    double rate = 0.0;  // 0 when T was given directly
    std::size_t reps = 0;
    std::size_t recovered = 0;
    double frequency = 0.0;
};

/// Grid point of the recovery probe: T = rate_to_T(n, rate) unless T > 0.
struct RecoveryPoint {
    std::size_t n = 0;
    double rate = 0.0;
    std::size_t T = 0;
};

/// Fraction of replicates where sigma_hat equals the true U-order exactly.
std::vector<RecoveryCell> permutation_recovery_probe(const std::vector<RecoveryPoint>& grid, std::size_t reps,
                                                     std::uint64_t seed, const DgpSpec& base,
                                                     const Eigen::VectorXd& x_star = Eigen::Vector2d(1.0, 4.5),
                                                     unsigned threads = 1);

struct SpacingPoint {
    double x = 0.0;
    double empirical = 0.0;
    double bound = 0.0;
    std::size_t reps = 0;

    /// Binomial standard error of `empirical`.
    double standard_error() const;
};

/// 1 - [1 - (n+1) x / L]^n.
double spacing_bound(std::size_t n, double x, double lower_derivative);

/// Evenly spaced grid of `points` values on [0, L/(n+1)].
std::vector<double> spacing_grid(std::size_t n, std::size_t points, double lower_derivative = 1.0);

/// Empirical P(min adjacent gap of sorted Y*_i <= x), Y*_i = U_i + U_i^2 c,
/// paired with the analytic bound. L = 1 for c >= 0. Throws DomainError for
/// x outside [0, L/(n+1)].
std::vector<SpacingPoint> spacing_bound_probe(std::size_t n, const std::vector<double>& x_grid, std::size_t reps,
                                              std::uint64_t seed, double slope_point = 4.5, unsigned threads = 1);

}  // namespace nafe
