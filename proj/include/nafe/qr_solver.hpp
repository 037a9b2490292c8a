#pragma once

#include "nafe/errors.hpp"

#include <Eigen/Dense>

namespace nafe {

/// Linear quantile regression: minimize sum_i rho_tau(y_i - x_i'b).
struct QrProblem {
    Eigen::MatrixXd design;    // m x p, full column rank
    Eigen::VectorXd response;  // m
    double tau = 0.5;
    double tol = 1e-8;         // relative objective change that ends the smoothing phase
    int max_iter = 500;        // smoothing iterations; pivot budget is max_iter + 4m
};

struct QrFit {
    Eigen::VectorXd coef;
    double objective = 0.0;
    int smoothing_iterations = 0;
    int pivots = 0;
};

class SolverError : public NumericalError {
public:
    SolverError(const std::string& message, Eigen::VectorXd best, double gap)
        : NumericalError(message), best_(std::move(best)), gap_(gap) {}
    /// Best iterate found before giving up.
    const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
    /// Steepest remaining descent rate along a simplex edge (0 at an optimum).
    double gap_estimate() const noexcept { return gap_; }

private:
    Eigen::VectorXd best_;
    double gap_;
};

/// rho_tau(u) = u (tau - 1{u < 0}).
inline double check_function(double u, double tau) noexcept {
    return u < 0.0 ? (tau - 1.0) * u : tau * u;
}

double check_loss(const Eigen::VectorXd& b, const QrProblem& prob);

/// Two phases: iteratively reweighted least squares on a smoothed check
/// loss, then exact simplex-style pivoting between basic solutions (p
/// observations fitted exactly) until no edge direction descends.
QrFit qr_solve(const QrProblem& prob);

inline Eigen::VectorXd qr_fit(const QrProblem& prob) { return qr_solve(prob).coef; }

}  // namespace nafe
