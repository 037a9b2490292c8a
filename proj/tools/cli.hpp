#pragma once

#include "nafe/mc_harness.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace nafe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Simulation grid before expansion: the design list is the product
/// family x n x (T or rate) x rho x sigma_v.
struct SimGrid {
    std::vector<DgpFamily> families;
    std::vector<std::size_t> ns;
    std::vector<double> rates;     // used when Ts is empty
    std::vector<std::size_t> Ts;
    std::vector<double> rhos;
    std::vector<double> sigma_vs;
    double shift = 4.0;
    std::vector<double> taus{0.25, 0.5, 0.75};
    std::vector<XStarRule> x_star_rules{XStarRule::slope_point(4.5)};
    std::vector<Estimator> estimators{Estimator::Nafe};
    std::size_t max_cell_obs = 1'000'000;
};

/// Grid of a named table preset (t1, t2, t3, t8). "custom" returns an empty
/// grid to be filled from flags. Throws UsageError for other names.
SimGrid preset_grid(const std::string& table);

/// Throws UsageError when a dimension of the grid is empty.
McConfig expand_grid(const SimGrid& grid, std::size_t reps, std::uint64_t seed, unsigned threads);

/// Parses "mean", a K-vector, or a (K-1)-vector that gets a leading 1.
/// Returns an empty vector for "mean".
Eigen::VectorXd parse_x_star(const std::string& text, std::size_t K, bool has_intercept);

/// Runs the command line and returns the exit code. Normal output goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace nafe::cli
