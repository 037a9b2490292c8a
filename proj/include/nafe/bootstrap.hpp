#pragma once

#include "nafe/errors.hpp"
#include "nafe/panel_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace nafe {

/// Cross-sectional bootstrap of beta_hat(tau).
struct BootstrapResult {
    std::size_t B = 0;
    std::vector<double> taus;
    Eigen::MatrixXd se;  // |taus| x K
    std::uint64_t seed = 0;
    std::size_t K = 0;
    std::size_t failed_replicates = 0;
    std::vector<bool> replicate_ok;  // B
    /// Flattened B x |taus| x K; NaN for failed replicates.
    std::vector<double> replicate_estimates;

    double estimate(std::size_t b, std::size_t tau_index, std::size_t k) const {
        return replicate_estimates[(b * taus.size() + tau_index) * K + k];
    }
};

class BootstrapError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Type-7 sample quantile: linear interpolation at position 1 + (B-1)p of
/// the sorted values.
double sample_quantile(std::vector<double> values, double p);

/// z_{0.75} - z_{0.25} = 2 Phi^{-1}(0.75).
double normal_iqr();

/// (q_{0.75} - q_{0.25}) / (z_{0.75} - z_{0.25}).
double iqr_standard_error(std::span<const double> values);

/// Resamples n whole units with replacement B times and recomputes
/// beta_hat(tau) at the given x_star. Replicate b draws from its own
/// counter stream, so the result does not depend on `threads`. A replicate
/// that contains a unit with singular design is recorded as failed; more
/// than 10% failures throws BootstrapError.
BootstrapResult bootstrap_se(const PanelDataset& d, std::span<const double> taus, const Eigen::VectorXd& x_star,
                             std::size_t B, std::uint64_t seed, unsigned threads = 1);

/// Rebuilds the standard errors from `replicate_estimates`.
Eigen::MatrixXd standard_errors_from_replicates(const BootstrapResult& result);

/// CSV columns tau,coefficient,se,B,seed,failed_replicates.
void write_bootstrap_csv(const BootstrapResult& result, const std::vector<std::string>& coefficient_names,
                         std::ostream& out);

}  // namespace nafe
