#include "nafe/dgp.hpp"

#include "nafe/errors.hpp"
#include "nafe/rng.hpp"
#include "nafe/text.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace nafe {

std::string to_string(DgpFamily family) {
    switch (family) {
        case DgpFamily::Baseline: return "baseline";
        case DgpFamily::RankMixture: return "rank_mixture";
        case DgpFamily::Multiplicative: return "multiplicative";
    }
    return "unknown";
}

DgpFamily parse_family(const std::string& name) {
    if (name == "baseline") return DgpFamily::Baseline;
    if (name == "rank_mixture" || name == "mixture") return DgpFamily::RankMixture;
    if (name == "multiplicative") return DgpFamily::Multiplicative;
    throw DomainError("unknown DGP family '" + name + "' (baseline, rank_mixture, multiplicative)");
}

void DgpSpec::check() const {
    if (n < 1) throw DomainError("DGP needs n >= 1");
    if (T < 2) throw DomainError("DGP needs T >= 2");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw DomainError("DGP needs rho >= 0");
    if (!(sigma_v >= 0.0) || !std::isfinite(sigma_v)) throw DomainError("DGP needs sigma_v >= 0");
    if (family == DgpFamily::RankMixture && sigma_v == 0.0)
        throw DomainError("rank_mixture DGP needs sigma_v > 0");
    if (!std::isfinite(shift)) throw DomainError("DGP shift must be finite");
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double rank_cdf(double w, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("rank_cdf needs sigma > 0; use rank_cdf_limit for sigma -> 0");
    auto g = [](double z) { return z * normal_cdf(z) + normal_pdf(z); };
    double f = sigma * (g(w / sigma) - g((w - 1.0) / sigma));
    return std::clamp(f, 0.0, 1.0);
}

double rank_cdf_limit(double w) { return std::clamp(w, 0.0, 1.0); }

namespace {

struct Streams {
    rng::CounterRng rank, regressor, idio;
    explicit Streams(std::uint64_t seed)
        : rank(seed, rng::Stream::Rank),
          regressor(seed, rng::Stream::Regressor),
          idio(seed, rng::Stream::Idiosyncratic) {}
};

std::vector<std::string> numbered(std::size_t count) {
    std::vector<std::string> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = std::to_string(i + 1);
    return ids;
}

template <class RegressorFn, class OutcomeFn>
DgpDraw generate(const DgpSpec& spec, std::uint64_t seed, RegressorFn make_x, OutcomeFn make_y) {
    spec.check();
    Streams s(seed);
    const auto n = static_cast<Eigen::Index>(spec.n), T = static_cast<Eigen::Index>(spec.T);
    DrawTruth truth;
    truth.family = spec.family;
    truth.u.resize(n);
    truth.v.resize(n, T);
    if (spec.family == DgpFamily::RankMixture) truth.u_it.resize(n, T);
    Eigen::VectorXd y(n * T);
    Eigen::MatrixXd x(n * T, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ui = static_cast<std::uint64_t>(i);
        const double u = s.rank.uniform(ui, 0);
        truth.u(i) = u;
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto tt = static_cast<std::uint32_t>(t);
            const double z = s.regressor.normal(ui, tt);
            const double v = spec.sigma_v * s.idio.normal(ui, tt);
            truth.v(i, t) = v;
            const double xv = make_x(z, u);
            x(i * T + t, 0) = 1.0;
            x(i * T + t, 1) = xv;
            y(i * T + t) = make_y(u, xv, v, truth, i, t);
        }
    }
    return {PanelDataset(numbered(spec.n), numbered(spec.T), std::move(y), std::move(x), {kInterceptName, "x1"},
                         true),
            std::move(truth)};
}

void require_family(const DgpSpec& spec, DgpFamily family) {
    if (spec.family != family)
        throw DomainError("sampler for " + to_string(family) + " called with a " + to_string(spec.family) +
                          " spec");
}

}  // namespace

DgpDraw sample_baseline(const DgpSpec& spec, std::uint64_t seed) {
    require_family(spec, DgpFamily::Baseline);
    return generate(
        spec, seed, [&](double z, double u) { return z + spec.shift + spec.rho * u; },
        [](double u, double xv, double v, DrawTruth&, Eigen::Index, Eigen::Index) { return u + u * u * xv + v; });
}

DgpDraw sample_multiplicative(const DgpSpec& spec, std::uint64_t seed) {
    require_family(spec, DgpFamily::Multiplicative);
    return generate(
        spec, seed, [&](double z, double u) { return (1.0 + spec.rho * u) * (z + spec.shift); },
        [](double u, double xv, double v, DrawTruth&, Eigen::Index, Eigen::Index) { return u + u * u * xv + v; });
}

DgpDraw sample_rank_mixture(const DgpSpec& spec, std::uint64_t seed) {
    require_family(spec, DgpFamily::RankMixture);
    const double sigma = spec.sigma_v;
    return generate(
        spec, seed, [&](double z, double u) { return z + spec.shift + spec.rho * u; },
        [sigma](double u, double xv, double v, DrawTruth& truth, Eigen::Index i, Eigen::Index t) {
            const double uit = rank_cdf(u + v, sigma);
            truth.u_it(i, t) = uit;
            return uit + uit * uit * xv;
        });
}

DgpDraw sample(const DgpSpec& spec, std::uint64_t seed) {
    switch (spec.family) {
        case DgpFamily::Baseline: return sample_baseline(spec, seed);
        case DgpFamily::RankMixture: return sample_rank_mixture(spec, seed);
        case DgpFamily::Multiplicative: return sample_multiplicative(spec, seed);
    }
    throw DomainError("unknown DGP family");
}

void write_truth_csv(const PanelDataset& data, const DrawTruth& truth, std::ostream& out) {
    if (static_cast<std::size_t>(truth.u.size()) != data.n())
        throw DimensionError("truth and panel disagree on n");
    out << "unit,u\n";
    for (std::size_t i = 0; i < data.n(); ++i)
        out << data.unit_ids()[i] << ',' << text::format_double(truth.u(static_cast<Eigen::Index>(i))) << '\n';
}

}  // namespace nafe
