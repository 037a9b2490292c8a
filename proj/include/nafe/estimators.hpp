#pragma once

#include "nafe/panel_data.hpp"
#include "nafe/qr_solver.hpp"

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace nafe {

/// Time-series OLS fit of one unit.
struct UnitFit {
    std::size_t unit_index = 0;  // 0-based position in the panel
    Eigen::VectorXd beta_hat;    // K
    Eigen::VectorXd residuals;   // T
    double gram_condition = 0.0;
};

/// beta_hat = argmin ||Y - X b||^2 via column-pivoted Householder QR.
/// Throws SingularDesignError (naming `unit_label`) when T < K or X is
/// rank deficient.
UnitFit ts_ols_unit(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                    std::size_t unit_index = 0, std::string_view unit_label = {});

/// One fit per unit, in unit order. On failure the error lists every
/// singular unit.
std::vector<UnitFit> fit_all_units(const PanelDataset& d, unsigned threads = 1);

/// Yhat*_i = x_star' beta_hat_i.
Eigen::VectorXd counterfactual_outcomes(std::span<const UnitFit> fits, const Eigen::VectorXd& x_star);

/// sigma[k] is the (0-based) index of the k-th smallest value; ties keep
/// ascending original index.
std::vector<std::size_t> rank_permutation(const Eigen::VectorXd& values);

/// Sorted coefficient path tau -> beta_hat(tau).
struct RankedPath {
    std::vector<std::size_t> sigma_hat;    // 0-based unit indices, sorted by counterfactual
    Eigen::MatrixXd sorted_beta;           // n x K, row k = beta_hat of unit sigma_hat[k]
    Eigen::VectorXd x_star;                // K
    Eigen::VectorXd sorted_counterfactual; // n, nondecreasing

    std::size_t n() const noexcept { return sigma_hat.size(); }
    std::size_t K() const noexcept { return static_cast<std::size_t>(sorted_beta.cols()); }
};

RankedPath coefficient_path(std::span<const UnitFit> fits, const Eigen::VectorXd& x_star);
/// Same, from an n x K matrix whose row i is beta_hat_i.
RankedPath coefficient_path(const Eigen::MatrixXd& unit_betas, const Eigen::VectorXd& x_star);

/// ceil(n tau) as a 1-based rank, with products within a few ulps of an
/// integer treated as that integer (so 0.3 * 10 gives 3, not 4).
std::size_t rank_index(std::size_t n, double tau);

/// Row ceil(n tau) of the sorted coefficients. Right-continuous plateaus
/// on ((k-1)/n, k/n]. Throws DomainError for tau outside (0,1).
Eigen::VectorXd beta_at(const RankedPath& path, double tau);

/// Convenience: steps 1-4 on a dataset.
Eigen::VectorXd nafe_estimate(const PanelDataset& d, const Eigen::VectorXd& x_star, double tau);

/// Within (fixed-effects) estimator.
struct WithinFe {
    Eigen::VectorXd slopes;        // K-1, one per non-intercept regressor
    Eigen::VectorXd unit_effects;  // n, alpha_i = ybar_i - xbar_i' slopes
};

WithinFe within_fe(const PanelDataset& d);

/// Two-step FE-QR: alpha_i from within-FE residual means, then pooled
/// quantile regression of Y - alpha_i on (1, X_-1) at tau. Returns the K-1
/// non-intercept coefficients.
Eigen::VectorXd canay_feqr(const PanelDataset& d, double tau);

/// Default finite-difference bandwidth n^(-1/5), shrunk so tau +- h stays
/// inside (0.01, 0.99).
double default_bandwidth(std::size_t n, double tau);

/// tau (1 - tau) beta_k'(tau)^2 / n with beta_k' from a central difference
/// of the estimated path.
double pointwise_asy_variance(const RankedPath& path, std::size_t k, double tau, double h);
double pointwise_asy_variance(const RankedPath& path, std::size_t k, double tau);

}  // namespace nafe
