#include "nafe/bootstrap.hpp"

#include "nafe/estimators.hpp"
#include "nafe/parallel.hpp"
#include "nafe/rng.hpp"
#include "nafe/text.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

namespace nafe {

double sample_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DimensionError("sample_quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double normal_iqr() {
    static const double iqr = 2.0 * boost::math::quantile(boost::math::normal_distribution<double>(), 0.75);
    return iqr;
}

double iqr_standard_error(std::span<const double> values) {
    std::vector<double> v(values.begin(), values.end());
    return (sample_quantile(v, 0.75) - sample_quantile(v, 0.25)) / normal_iqr();
}

Eigen::MatrixXd standard_errors_from_replicates(const BootstrapResult& result) {
    Eigen::MatrixXd se(static_cast<Eigen::Index>(result.taus.size()), static_cast<Eigen::Index>(result.K));
    std::vector<double> column;
    for (std::size_t j = 0; j < result.taus.size(); ++j) {
        for (std::size_t k = 0; k < result.K; ++k) {
            column.clear();
            for (std::size_t b = 0; b < result.B; ++b)
                if (result.replicate_ok[b]) column.push_back(result.estimate(b, j, k));
            se(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                column.size() < 2 ? std::numeric_limits<double>::quiet_NaN() : iqr_standard_error(column);
        }
    }
    return se;
}

BootstrapResult bootstrap_se(const PanelDataset& d, std::span<const double> taus, const Eigen::VectorXd& x_star,
                             std::size_t B, std::uint64_t seed, unsigned threads) {
    if (B < 2) throw DomainError("bootstrap needs B >= 2");
    if (taus.empty()) throw DomainError("bootstrap needs at least one tau");
    for (double tau : taus)
        if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in the open interval (0,1)");
    if (static_cast<std::size_t>(x_star.size()) != d.K())
        throw DimensionError("x_star length does not match the number of regressors");

    // A unit's TS-OLS fit depends only on its own block, so each replicate
    // reuses the per-unit fits of the units it draws.
    const std::size_t n = d.n();
    std::vector<std::optional<UnitFit>> unit_fits(n);
    parallel_for(n, threads, [&](std::size_t i) {
        try {
            unit_fits[i] = ts_ols_unit(d.unit_design(i), d.unit_response(i), i, d.unit_ids()[i]);
        } catch (const SingularDesignError&) {
        }
    });

    BootstrapResult result;
    result.B = B;
    result.taus.assign(taus.begin(), taus.end());
    result.seed = seed;
    result.K = d.K();
    result.replicate_ok.assign(B, false);
    result.replicate_estimates.assign(B * taus.size() * d.K(), std::numeric_limits<double>::quiet_NaN());

    const rng::CounterRng draws(seed, rng::Stream::Resample);
    std::vector<char> ok(B, 0);
    parallel_for(B, threads, [&](std::size_t b) {
        Eigen::MatrixXd sample(static_cast<Eigen::Index>(n), x_star.size());
        for (std::size_t j = 0; j < n; ++j) {
            const auto unit = static_cast<std::size_t>(draws.below(n, b, static_cast<std::uint32_t>(j)));
            if (!unit_fits[unit]) return;  // failed replicate
            sample.row(static_cast<Eigen::Index>(j)) = unit_fits[unit]->beta_hat.transpose();
        }
        const RankedPath path = coefficient_path(sample, x_star);
        for (std::size_t j = 0; j < taus.size(); ++j) {
            Eigen::VectorXd beta = beta_at(path, taus[j]);
            for (std::size_t k = 0; k < d.K(); ++k)
                result.replicate_estimates[(b * taus.size() + j) * d.K() + k] = beta(static_cast<Eigen::Index>(k));
        }
        ok[b] = 1;
    });
    for (std::size_t b = 0; b < B; ++b) {
        result.replicate_ok[b] = ok[b] != 0;
        if (!ok[b]) ++result.failed_replicates;
    }
    if (10 * result.failed_replicates > B) {
        std::vector<std::string> singular;
        for (std::size_t i = 0; i < n; ++i)
            if (!unit_fits[i]) singular.push_back(d.unit_ids()[i]);
        std::string names;
        for (std::size_t j = 0; j < singular.size() && j < 10; ++j) names += (j ? ", " : "") + singular[j];
        throw BootstrapError(std::to_string(result.failed_replicates) + " of " + std::to_string(B) +
                             " bootstrap replicates failed (more than 10%); units with singular design: " + names);
    }
    result.se = standard_errors_from_replicates(result);
    return result;
}

void write_bootstrap_csv(const BootstrapResult& result, const std::vector<std::string>& coefficient_names,
                         std::ostream& out) {
    if (coefficient_names.size() != result.K) throw DimensionError("coefficient name count does not match K");
    out << "tau,coefficient,se,B,seed,failed_replicates\n";
    for (std::size_t j = 0; j < result.taus.size(); ++j) {
        for (std::size_t k = 0; k < result.K; ++k) {
            out << text::format_double(result.taus[j]) << ',' << coefficient_names[k] << ','
                << text::format_double(result.se(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) << ','
                << result.B << ',' << result.seed << ',' << result.failed_replicates << '\n';
        }
    }
}

}  // namespace nafe
