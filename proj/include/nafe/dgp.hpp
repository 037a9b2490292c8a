#pragma once

#include "nafe/panel_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace nafe {

enum class DgpFamily { Baseline, RankMixture, Multiplicative };

std::string to_string(DgpFamily family);
DgpFamily parse_family(const std::string& name);

/// Simulation design. All families use beta_0(u) = u and beta_1(u) = u^2.
///
///   Baseline:       X = Z + shift + rho U_i,           Y = U_i + U_i^2 X + V
///   RankMixture:    X = Z + shift + rho U_i,           Y = U_it + U_it^2 X,
///                   U_it = F(U_i + V), F the CDF of Unif(0,1) + N(0, sigma_v^2)
///   Multiplicative: X = (1 + rho U_i)(Z + shift),      Y = U_i + U_i^2 X + V
///
/// with Z ~ N(0,1), V ~ N(0, sigma_v^2), U_i ~ Unif(0,1).
struct DgpSpec {
    DgpFamily family = DgpFamily::Baseline;
    std::size_t n = 100;
    std::size_t T = 100;
    double rho = 0.0;
    double sigma_v = 1.0;
    double shift = 4.0;

    /// Throws DomainError when n < 1, T < 2, rho < 0 or sigma_v < 0
    /// (or sigma_v == 0 for RankMixture).
    void check() const;
};

inline double beta0_true(double u) { return u; }
inline double beta1_true(double u) { return u * u; }

/// Latent draws behind one simulated panel.
struct DrawTruth {
    DgpFamily family = DgpFamily::Baseline;
    Eigen::VectorXd u;     // n, U_i
    Eigen::MatrixXd v;     // n x T, V_it (the V~ inside F for RankMixture)
    Eigen::MatrixXd u_it;  // n x T, RankMixture only (empty otherwise)

    /// E[beta_1(U)] = E[U^2], the target of the within-FE slope.
    static constexpr double fe_target = 1.0 / 3.0;
};

struct DgpDraw {
    PanelDataset data;
    DrawTruth truth;
};

DgpDraw sample_baseline(const DgpSpec& spec, std::uint64_t seed);
DgpDraw sample_rank_mixture(const DgpSpec& spec, std::uint64_t seed);
DgpDraw sample_multiplicative(const DgpSpec& spec, std::uint64_t seed);
/// Dispatches on spec.family.
DgpDraw sample(const DgpSpec& spec, std::uint64_t seed);

/// F(w) = P(U + V <= w), U ~ Unif(0,1) independent of V ~ N(0, sigma^2):
/// sigma [G(w/sigma) - G((w-1)/sigma)] with G(z) = z Phi(z) + phi(z).
/// Throws DomainError for sigma <= 0.
double rank_cdf(double w, double sigma);
/// The sigma -> 0 limit, min(max(w, 0), 1).
double rank_cdf_limit(double w);

double normal_cdf(double z);
double normal_pdf(double z);

/// Side file with columns unit,u.
void write_truth_csv(const PanelDataset& data, const DrawTruth& truth, std::ostream& out);

}  // namespace nafe
