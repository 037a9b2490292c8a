#include "nafe/estimators.hpp"

#include "nafe/errors.hpp"
#include "nafe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

namespace nafe {

UnitFit ts_ols_unit(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                    std::size_t unit_index, std::string_view unit_label) {
    const std::string label = unit_label.empty() ? std::to_string(unit_index + 1) : std::string(unit_label);
    if (x.rows() != y.size()) throw DimensionError("unit " + label + ": design and response lengths differ");
    if (x.rows() < x.cols()) {
        throw SingularDesignError("unit " + label + ": T = " + std::to_string(x.rows()) + " < K = " +
                                      std::to_string(x.cols()),
                                  {label});
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) {
        throw SingularDesignError("unit " + label + ": singular design (rank " + std::to_string(qr.rank()) +
                                      " < K = " + std::to_string(x.cols()) + ")",
                                  {label});
    }
    UnitFit fit;
    fit.unit_index = unit_index;
    fit.beta_hat = qr.solve(y);
    fit.residuals = y - x * fit.beta_hat;
    // cond(X'X) = cond(R)^2, R being the K x K triangular factor.
    Eigen::MatrixXd r = qr.matrixR().topLeftCorner(x.cols(), x.cols()).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    const auto& s = svd.singularValues();
    double ratio = s(0) / s(s.size() - 1);
    fit.gram_condition = ratio * ratio;
    return fit;
}

std::vector<UnitFit> fit_all_units(const PanelDataset& d, unsigned threads) {
    std::vector<std::optional<UnitFit>> slots(d.n());
    std::vector<std::string> failed_msgs(d.n());
    parallel_for(d.n(), threads, [&](std::size_t i) {
        try {
            slots[i] = ts_ols_unit(d.unit_design(i), d.unit_response(i), i, d.unit_ids()[i]);
        } catch (const SingularDesignError& e) {
            failed_msgs[i] = e.what();
        }
    });
    std::vector<std::string> failed;
    std::string first_msg;
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (!slots[i]) {
            if (failed.empty()) first_msg = failed_msgs[i];
            failed.push_back(d.unit_ids()[i]);
        }
    }
    if (!failed.empty()) {
        std::string names;
        for (std::size_t j = 0; j < failed.size() && j < 10; ++j) names += (j ? ", " : "") + failed[j];
        if (failed.size() > 10) names += ", ...";
        throw SingularDesignError(std::to_string(failed.size()) + " unit(s) with singular design: " + names +
                                      " (" + first_msg + ")",
                                  failed);
    }
    std::vector<UnitFit> fits;
    fits.reserve(d.n());
    for (auto& slot : slots) fits.push_back(std::move(*slot));
    return fits;
}

Eigen::VectorXd counterfactual_outcomes(std::span<const UnitFit> fits, const Eigen::VectorXd& x_star) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(fits.size()));
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (fits[i].beta_hat.size() != x_star.size())
            throw DimensionError("x_star has length " + std::to_string(x_star.size()) + " but coefficients have " +
                                 std::to_string(fits[i].beta_hat.size()));
        out(static_cast<Eigen::Index>(i)) = x_star.dot(fits[i].beta_hat);
    }
    return out;
}

std::vector<std::size_t> rank_permutation(const Eigen::VectorXd& values) {
    std::vector<std::size_t> sigma(static_cast<std::size_t>(values.size()));
    std::iota(sigma.begin(), sigma.end(), std::size_t{0});
    std::stable_sort(sigma.begin(), sigma.end(), [&](std::size_t a, std::size_t b) {
        return values(static_cast<Eigen::Index>(a)) < values(static_cast<Eigen::Index>(b));
    });
    return sigma;
}

RankedPath coefficient_path(const Eigen::MatrixXd& unit_betas, const Eigen::VectorXd& x_star) {
    if (unit_betas.rows() == 0) throw DimensionError("coefficient_path needs at least one unit");
    if (unit_betas.cols() != x_star.size())
        throw DimensionError("x_star has length " + std::to_string(x_star.size()) + " but coefficients have " +
                             std::to_string(unit_betas.cols()));
    const Eigen::VectorXd y_star = unit_betas * x_star;
    RankedPath path;
    path.sigma_hat = rank_permutation(y_star);
    path.x_star = x_star;
    const auto n = unit_betas.rows();
    path.sorted_beta.resize(n, x_star.size());
    path.sorted_counterfactual.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto unit = static_cast<Eigen::Index>(path.sigma_hat[static_cast<std::size_t>(k)]);
        path.sorted_beta.row(k) = unit_betas.row(unit);
        path.sorted_counterfactual(k) = y_star(unit);
    }
    return path;
}

RankedPath coefficient_path(std::span<const UnitFit> fits, const Eigen::VectorXd& x_star) {
    if (fits.empty()) throw DimensionError("coefficient_path needs at least one unit");
    Eigen::MatrixXd betas(static_cast<Eigen::Index>(fits.size()), x_star.size());
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (fits[i].beta_hat.size() != x_star.size())
            throw DimensionError("x_star has length " + std::to_string(x_star.size()) + " but coefficients have " +
                                 std::to_string(fits[i].beta_hat.size()));
        betas.row(static_cast<Eigen::Index>(i)) = fits[i].beta_hat.transpose();
    }
    return coefficient_path(betas, x_star);
}

std::size_t rank_index(std::size_t n, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in the open interval (0,1)");
    const double product = static_cast<double>(n) * tau;
    const double nearest = std::round(product);
    double k = std::abs(product - nearest) <= 4.0 * std::numeric_limits<double>::epsilon() * product
                   ? nearest
                   : std::ceil(product);
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, n);
}

Eigen::VectorXd beta_at(const RankedPath& path, double tau) {
    std::size_t k = rank_index(path.n(), tau);
    return path.sorted_beta.row(static_cast<Eigen::Index>(k - 1)).transpose();
}

Eigen::VectorXd nafe_estimate(const PanelDataset& d, const Eigen::VectorXd& x_star, double tau) {
    auto fits = fit_all_units(d);
    return beta_at(coefficient_path(fits, x_star), tau);
}

namespace {

void require_intercept(const PanelDataset& d, const char* who) {
    if (!d.has_intercept_column()) throw DomainError(std::string(who) + " requires an intercept column");
    if (d.K() < 2) throw DimensionError(std::string(who) + " requires at least one non-intercept regressor");
}

}  // namespace

WithinFe within_fe(const PanelDataset& d) {
    require_intercept(d, "within_fe");
    const auto n = static_cast<Eigen::Index>(d.n()), T = static_cast<Eigen::Index>(d.T());
    const Eigen::Index slopes = static_cast<Eigen::Index>(d.K()) - 1;
    Eigen::MatrixXd xd(n * T, slopes);
    Eigen::VectorXd yd(n * T);
    Eigen::MatrixXd xbar(n, slopes);
    Eigen::VectorXd ybar(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto xi = d.unit_design(static_cast<std::size_t>(i)).rightCols(slopes);
        auto yi = d.unit_response(static_cast<std::size_t>(i));
        xbar.row(i) = xi.colwise().mean();
        ybar(i) = yi.mean();
        xd.middleRows(i * T, T) = xi.rowwise() - xbar.row(i);
        yd.segment(i * T, T) = yi.array() - ybar(i);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xd);
    // A column annihilated by demeaning leaves only rounding noise, which the
    // relative rank test of the QR would not flag on its own.
    const double scale = d.x().rightCols(slopes).norm();
    Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
    if (qr.rank() < slopes || diag.minCoeff() <= 1e-10 * scale) {
        throw SingularDesignError("within_fe: demeaned regressors are rank deficient "
                                  "(time-invariant or collinear regressor)",
                                  {});
    }
    WithinFe out;
    out.slopes = qr.solve(yd);
    // One step of iterative refinement.
    out.slopes += qr.solve(yd - xd * out.slopes);
    out.unit_effects = ybar - xbar * out.slopes;
    return out;
}

Eigen::VectorXd canay_feqr(const PanelDataset& d, double tau) {
    require_intercept(d, "canay_feqr");
    if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in the open interval (0,1)");
    if (d.T() < 2) throw DimensionError("canay_feqr requires T >= 2");
    const WithinFe fe = within_fe(d);
    const auto T = static_cast<Eigen::Index>(d.T());
    QrProblem prob;
    prob.design = d.x();
    prob.response = d.y();
    prob.tau = tau;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.n()); ++i)
        prob.response.segment(i * T, T).array() -= fe.unit_effects(i);
    Eigen::VectorXd b = qr_fit(prob);
    return b.tail(b.size() - 1);
}

double default_bandwidth(std::size_t n, double tau) {
    double h = std::pow(static_cast<double>(n), -0.2);
    h = std::min({h, tau - 0.01, 0.99 - tau});
    if (!(h > 0.0)) throw DomainError("no admissible bandwidth: tau must lie in (0.01, 0.99)");
    return h;
}

double pointwise_asy_variance(const RankedPath& path, std::size_t k, double tau, double h) {
    if (k >= path.K()) throw DimensionError("coefficient index out of range");
    if (!(h > 0.0) || !(tau - h > 0.0) || !(tau + h < 1.0))
        throw DomainError("bandwidth must keep tau - h and tau + h inside (0,1)");
    const auto kk = static_cast<Eigen::Index>(k);
    double slope = (beta_at(path, tau + h)(kk) - beta_at(path, tau - h)(kk)) / (2.0 * h);
    return tau * (1.0 - tau) * slope * slope / static_cast<double>(path.n());
}

double pointwise_asy_variance(const RankedPath& path, std::size_t k, double tau) {
    return pointwise_asy_variance(path, k, tau, default_bandwidth(path.n(), tau));
}

}  // namespace nafe
