#include "nafe/dgp.hpp"
#include "nafe/errors.hpp"
#include "nafe/estimators.hpp"
#include "nafe/rng.hpp"

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace nafe;

namespace {

double quadrature_rank_cdf(double w, double sigma) {
    const boost::math::normal_distribution<double> std_normal;
    auto integrand = [&](double u) { return boost::math::cdf(std_normal, (w - u) / sigma); };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-14, &err);
}

double variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
    using rng::Counter;
    CHECK(rng::philox4x32_10({0, 0, 0, 0}, {0, 0}) == Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(rng::philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(rng::philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter generator ranges and moments") {
    const rng::CounterRng g(1234, rng::Stream::Probe);
    double sum = 0.0, sum_sq = 0.0, nsum = 0.0, nsum_sq = 0.0;
    const int count = 200000;
    for (int i = 0; i < count; ++i) {
        double u = g.uniform(static_cast<std::uint64_t>(i), 3);
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum_sq += u * u;
        double z = g.normal(static_cast<std::uint64_t>(i), 4);
        nsum += z;
        nsum_sq += z * z;
        REQUIRE(g.below(7, static_cast<std::uint64_t>(i), 5) < 7);
    }
    CHECK(std::abs(sum / count - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / count));
    CHECK(std::abs(sum_sq / count - 1.0 / 3.0) < 0.005);
    CHECK(std::abs(nsum / count) < 4.0 / std::sqrt(count));
    CHECK(std::abs(nsum_sq / count - 1.0) < 0.015);
    CHECK(g.bits(5, 6) == rng::CounterRng(1234, rng::Stream::Probe).bits(5, 6));
    CHECK(g.bits(5, 6) != rng::CounterRng(1234, rng::Stream::Rank).bits(5, 6));
    CHECK(rng::derive_seed(42, 0, 1) != rng::derive_seed(42, 1, 0));
}

TEST_CASE("rank_cdf closed form matches quadrature") {
    for (double sigma : {0.01, 0.1, 0.5, 1.0, 3.0}) {
        for (double w : {-2.0, -0.3, 0.0, 0.1, 0.5, 0.8, 0.97, 1.2, 3.0}) {
            CHECK(std::abs(rank_cdf(w, sigma) - quadrature_rank_cdf(w, sigma)) <= 1e-10);
        }
    }
    CHECK(std::abs(rank_cdf(0.8, 0.1) - quadrature_rank_cdf(0.8, 0.1)) <= 1e-10);
}

TEST_CASE("rank_cdf shape") {
    for (double sigma : {0.01, 0.3, 2.0}) {
        CHECK(rank_cdf(0.5, sigma) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(rank_cdf(-1e6, sigma) == 0.0);
        CHECK(rank_cdf(1e6, sigma) == doctest::Approx(1.0));
        double prev = 0.0;
        for (double w = -3.0; w <= 4.0; w += 0.01) {
            double f = rank_cdf(w, sigma);
            CHECK(f >= prev - 1e-15);
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
            CHECK(f + rank_cdf(1.0 - w, sigma) == doctest::Approx(1.0).epsilon(1e-12));
            prev = f;
        }
    }
    CHECK_THROWS_AS(rank_cdf(0.5, 0.0), DomainError);
    CHECK(rank_cdf_limit(-0.2) == 0.0);
    CHECK(rank_cdf_limit(0.3) == 0.3);
    CHECK(rank_cdf_limit(1.7) == 1.0);
    CHECK(std::abs(rank_cdf(0.3, 1e-6) - rank_cdf_limit(0.3)) < 1e-9);
}

TEST_CASE("spec preconditions") {
    DgpSpec spec;
    spec.T = 1;
    CHECK_THROWS_AS(sample_baseline(spec, 1), DomainError);
    spec = {};
    spec.rho = -1;
    CHECK_THROWS_AS(sample_baseline(spec, 1), DomainError);
    spec = {};
    spec.family = DgpFamily::RankMixture;
    spec.sigma_v = 0.0;
    CHECK_THROWS_AS(sample(spec, 1), DomainError);
    spec = {};
    CHECK_THROWS_AS(sample_multiplicative(spec, 1), DomainError);  // wrong family
    CHECK(parse_family("mixture") == DgpFamily::RankMixture);
    CHECK(to_string(parse_family("multiplicative")) == "multiplicative");
    CHECK_THROWS_AS(parse_family("quadratic"), DomainError);
}

TEST_CASE("draws are deterministic and U does not depend on T") {
    DgpSpec spec;
    spec.n = 40;
    spec.T = 5;
    spec.rho = 1.0;
    auto a = sample_baseline(spec, 77);
    auto b = sample_baseline(spec, 77);
    CHECK(a.data.y() == b.data.y());
    CHECK(a.data.x() == b.data.x());
    CHECK(a.truth.u == b.truth.u);
    spec.T = 9;
    auto c = sample_baseline(spec, 77);
    CHECK(c.truth.u == a.truth.u);
    CHECK(sample_baseline(spec, 78).truth.u != a.truth.u);
    for (Eigen::Index i = 0; i < a.truth.u.size(); ++i) {
        CHECK(a.truth.u(i) > 0.0);
        CHECK(a.truth.u(i) < 1.0);
    }
}

TEST_CASE("truth reproduces the panel bitwise") {
    for (auto family : {DgpFamily::Baseline, DgpFamily::RankMixture, DgpFamily::Multiplicative}) {
        DgpSpec spec;
        spec.family = family;
        spec.n = 25;
        spec.T = 7;
        spec.rho = 3.0;
        spec.sigma_v = 0.3;
        auto draw = sample(spec, 5);
        for (std::size_t i = 0; i < spec.n; ++i) {
            const double u = draw.truth.u(static_cast<Eigen::Index>(i));
            for (std::size_t t = 0; t < spec.T; ++t) {
                const double x = draw.data.x(i, t, 1);
                const double v = draw.truth.v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
                double y;
                if (family == DgpFamily::RankMixture) {
                    const double uit = rank_cdf(u + v, spec.sigma_v);
                    CHECK(uit == draw.truth.u_it(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
                    y = uit + uit * uit * x;
                } else {
                    y = u + u * u * x + v;
                }
                CHECK(y == draw.data.y(i, t));
            }
        }
    }
}

TEST_CASE("noiseless baseline fits exactly") {
    DgpSpec spec;
    spec.n = 30;
    spec.T = 6;
    spec.sigma_v = 0.0;
    auto draw = sample_baseline(spec, 9);
    for (const auto& fit : fit_all_units(draw.data)) CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("regressor is correlated with the rank under endogeneity") {
    DgpSpec spec;
    spec.n = 1000;
    spec.T = 10;
    spec.rho = 1.0;
    auto draw = sample_baseline(spec, 21);
    Eigen::VectorXd xbar(1000);
    for (std::size_t i = 0; i < 1000; ++i) xbar(static_cast<Eigen::Index>(i)) = draw.data.unit_design(i).col(1).mean();
    const Eigen::VectorXd& u = draw.truth.u;
    double mx = xbar.mean(), mu = u.mean();
    double cov = ((xbar.array() - mx) * (u.array() - mu)).mean();
    double corr = cov / std::sqrt((xbar.array() - mx).square().mean() * (u.array() - mu).square().mean());
    // Population value: rho sd(U) / sqrt(rho^2 var(U) + 1/T).
    double population = std::sqrt(1.0 / 12.0) / std::sqrt(1.0 / 12.0 + 0.1);
    CHECK(corr >= 0.2);
    CHECK(std::abs(corr - population) < 0.05);
}

TEST_CASE("shifted regressor is almost surely positive") {
    DgpSpec spec;
    spec.n = 1000;
    spec.T = 100;
    auto d = sample_baseline(spec, 3).data;
    auto positive = (d.x().col(1).array() > 0.0).count();
    CHECK(static_cast<double>(positive) / 1e5 > 0.9999);
}

TEST_CASE("mixture ranks are uniform (Kolmogorov-Smirnov)") {
    DgpSpec spec;
    spec.family = DgpFamily::RankMixture;
    // Ranks of one unit share U_i; a short panel keeps the draws close to
    // independent so the iid KS critical value applies.
    spec.n = 5000;
    spec.T = 2;
    spec.sigma_v = 1.0;
    auto draw = sample_rank_mixture(spec, 13);
    std::vector<double> v(draw.truth.u_it.data(), draw.truth.u_it.data() + draw.truth.u_it.size());
    std::sort(v.begin(), v.end());
    const double m = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k)
        d = std::max({d, static_cast<double>(k + 1) / m - v[k], v[k] - static_cast<double>(k) / m});
    CHECK(d <= 1.63 / std::sqrt(m));
}

TEST_CASE("mixture variance components follow sigma_v") {
    auto ratio = [](double sigma) {
        DgpSpec spec;
        spec.family = DgpFamily::RankMixture;
        spec.n = 400;
        spec.T = 50;
        spec.sigma_v = sigma;
        auto draw = sample_rank_mixture(spec, 31);
        std::vector<double> means, within;
        for (Eigen::Index i = 0; i < draw.truth.u_it.rows(); ++i) {
            Eigen::VectorXd row = draw.truth.u_it.row(i).transpose();
            means.push_back(row.mean());
            std::vector<double> r(row.data(), row.data() + row.size());
            within.push_back(variance(r));
        }
        double mean_within = 0.0;
        for (double w : within) mean_within += w;
        mean_within /= static_cast<double>(within.size());
        return mean_within / variance(means);
    };
    CHECK(ratio(0.01) < 0.1);
    CHECK(ratio(1.0) > 1.0);
}

TEST_CASE("multiplicative family") {
    DgpSpec spec;
    spec.n = 20;
    spec.T = 8;
    spec.rho = 0.0;
    spec.sigma_v = 0.5;
    auto base = sample_baseline(spec, 44);
    spec.family = DgpFamily::Multiplicative;
    auto mult = sample_multiplicative(spec, 44);
    CHECK(mult.data.x() == base.data.x());
    CHECK(mult.data.y() == base.data.y());
    CHECK(DrawTruth::fe_target == 1.0 / 3.0);
}

TEST_CASE("FE slope is biased upward under multiplicative endogeneity") {
    DgpSpec spec;
    spec.family = DgpFamily::Multiplicative;
    spec.rho = 10.0;
    spec.sigma_v = 0.1;
    double bias = 0.0;
    const int reps = 40;
    for (int r = 0; r < reps; ++r)
        bias += within_fe(sample(spec, rng::derive_seed(8, 0, static_cast<std::uint64_t>(r))).data).slopes(0) -
                DrawTruth::fe_target;
    bias /= reps;
    CHECK(bias > 0.15);
    CHECK(bias < 0.30);
}

TEST_CASE("truth side file") {
    DgpSpec spec;
    spec.n = 3;
    auto draw = sample_baseline(spec, 1);
    std::ostringstream out;
    write_truth_csv(draw.data, draw.truth, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "unit,u");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        auto comma = line.find(',');
        CHECK(std::stod(line.substr(comma + 1)) == draw.truth.u(rows - 1));
    }
    CHECK(rows == 3);
}
