#include "nafe/qr_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace nafe {

namespace {

double loss_of_residuals(const Eigen::VectorXd& r, double tau) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) total += check_function(r(i), tau);
    return total;
}

void check_problem(const QrProblem& prob) {
    const auto m = prob.design.rows(), p = prob.design.cols();
    if (!(prob.tau > 0.0 && prob.tau < 1.0))
        throw DomainError("quantile level tau must lie in the open interval (0,1)");
    if (p < 1 || m < p) throw DimensionError("quantile regression needs m >= p >= 1");
    if (prob.response.size() != m) throw DimensionError("design and response lengths differ");
    if (prob.max_iter < 1 || !(prob.tol > 0.0)) throw DomainError("tol and max_iter must be positive");
    if (!prob.design.allFinite() || !prob.response.allFinite())
        throw DomainError("quantile regression inputs must be finite");
}

// Smoothed-loss IRLS: weights (tau or 1-tau) / max(|r|, eps), eps shrinking.
Eigen::VectorXd smoothed_start(const QrProblem& prob, int& iterations) {
    const auto& X = prob.design;
    const auto& y = prob.response;
    Eigen::VectorXd b = X.colPivHouseholderQr().solve(y);
    Eigen::VectorXd r = y - X * b;
    const double scale = r.cwiseAbs().mean();
    if (scale == 0.0) return b;
    double eps = scale;
    const double eps_floor = scale * 1e-6;
    double prev = loss_of_residuals(r, prob.tau);
    Eigen::VectorXd w(X.rows());
    iterations = 0;
    const int budget = std::min(prob.max_iter, 60);
    for (; iterations < budget; ++iterations) {
        for (Eigen::Index i = 0; i < r.size(); ++i)
            w(i) = (r(i) > 0.0 ? prob.tau : 1.0 - prob.tau) / std::max(std::abs(r(i)), eps);
        Eigen::MatrixXd gram = X.transpose() * w.asDiagonal() * X;
        Eigen::VectorXd rhs = X.transpose() * w.cwiseProduct(y);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success) break;
        Eigen::VectorXd next = ldlt.solve(rhs);
        if (!next.allFinite()) break;
        Eigen::VectorXd r_next = y - X * next;
        double obj = loss_of_residuals(r_next, prob.tau);
        if (obj <= prev) {
            b = std::move(next);
            r = std::move(r_next);
        }
        // Only a starting point is needed here; the pivoting phase is exact.
        bool settled = std::abs(prev - obj) <= 1e-4 * (1.0 + std::abs(obj));
        prev = std::min(prev, obj);
        if (settled && eps <= eps_floor) break;
        if (settled) eps = std::max(eps * 0.1, eps_floor);
    }
    return b;
}

// p rows with the smallest |residual| that form a nonsingular block.
std::vector<Eigen::Index> initial_basis(const QrProblem& prob, const Eigen::VectorXd& r) {
    const auto m = prob.design.rows(), p = prob.design.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(r(a)) < std::abs(r(b)); });
    std::vector<Eigen::Index> basis;
    Eigen::MatrixXd q(p, 0);  // orthonormal basis of the chosen rows
    const double scale = prob.design.cwiseAbs().maxCoeff();
    for (Eigen::Index idx : order) {
        Eigen::VectorXd v = prob.design.row(idx).transpose();
        double norm0 = v.norm();
        if (norm0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) v -= q * (q.transpose() * v);
        if (v.norm() <= 1e-10 * std::max(norm0, scale)) continue;
        q.conservativeResize(Eigen::NoChange, q.cols() + 1);
        q.col(q.cols() - 1) = v.normalized();
        basis.push_back(idx);
        if (static_cast<Eigen::Index>(basis.size()) == p) break;
    }
    if (static_cast<Eigen::Index>(basis.size()) < p)
        throw SingularDesignError("quantile regression design is not of full column rank", {});
    return basis;
}

struct Vertex {
    std::vector<Eigen::Index> basis;
    Eigen::MatrixXd block_inverse;  // (X_h)^{-1}
    Eigen::VectorXd coef;
};

bool make_vertex(const QrProblem& prob, std::vector<Eigen::Index> basis, Vertex& out) {
    const auto p = prob.design.cols();
    Eigen::MatrixXd block(p, p);
    Eigen::VectorXd rhs(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        block.row(j) = prob.design.row(basis[static_cast<std::size_t>(j)]);
        rhs(j) = prob.response(basis[static_cast<std::size_t>(j)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(block);
    if (!lu.isInvertible()) return false;
    out.basis = std::move(basis);
    out.block_inverse = lu.inverse();
    out.coef = lu.solve(rhs);
    return true;
}

}  // namespace

double check_loss(const Eigen::VectorXd& b, const QrProblem& prob) {
    if (b.size() != prob.design.cols() || prob.response.size() != prob.design.rows())
        throw DimensionError("check_loss: dimensions do not agree");
    return loss_of_residuals(prob.response - prob.design * b, prob.tau);
}

QrFit qr_solve(const QrProblem& prob) {
    check_problem(prob);
    const auto& X = prob.design;
    const auto& y = prob.response;
    const auto m = X.rows(), p = X.cols();
    const double tau = prob.tau;

    QrFit fit;
    Eigen::VectorXd start = smoothed_start(prob, fit.smoothing_iterations);

    Vertex vertex;
    if (!make_vertex(prob, initial_basis(prob, y - X * start), vertex))
        throw SingularDesignError("quantile regression design is not of full column rank", {});

    const double y_scale = 1.0 + y.cwiseAbs().maxCoeff();
    const int pivot_budget = prob.max_iter + 4 * static_cast<int>(m);
    std::vector<char> in_basis(static_cast<std::size_t>(m), 0);
    Eigen::VectorXd r(m), a(m), best_a(m);
    std::vector<std::pair<double, Eigen::Index>> breaks;
    breaks.reserve(static_cast<std::size_t>(m));

    for (;;) {
        std::fill(in_basis.begin(), in_basis.end(), 0);
        for (auto h : vertex.basis) in_basis[static_cast<std::size_t>(h)] = 1;
        r.noalias() = y - X * vertex.coef;
        const double ztol = 1e-12 * y_scale;
        for (auto h : vertex.basis) r(h) = 0.0;

        // Rows fitted exactly. More than p of them makes the vertex degenerate:
        // descent may then need a different set of p-1 rows held at zero, so
        // every such set is tried (the rays of the local arrangement).
        std::vector<Eigen::Index> zero_rows = vertex.basis;
        for (Eigen::Index i = 0; i < m; ++i)
            if (!in_basis[static_cast<std::size_t>(i)] && std::abs(r(i)) <= ztol) zero_rows.push_back(i);

        double best_rate = 0.0;
        Eigen::VectorXd best_d;
        std::vector<Eigen::Index> best_fixed;
        // Directional derivative of the loss along +d and -d, per unit length.
        auto consider = [&](const Eigen::VectorXd& d, const std::vector<Eigen::Index>& fixed) {
            a.noalias() = X * d;
            for (auto h : fixed) a(h) = 0.0;
            double plus = 0.0, minus = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                double ai = a(i);
                if (ai == 0.0) continue;
                if (std::abs(r(i)) <= ztol) {
                    plus += std::max(-tau * ai, (1.0 - tau) * ai);
                    minus += std::max(tau * ai, -(1.0 - tau) * ai);
                } else if (r(i) > 0.0) {
                    plus += -tau * ai;
                    minus += tau * ai;
                } else {
                    plus += (1.0 - tau) * ai;
                    minus += -(1.0 - tau) * ai;
                }
            }
            const double norm = d.norm();
            if (plus / norm < best_rate) {
                best_rate = plus / norm;
                best_d = d;
                best_a = a;
                best_fixed = fixed;
            }
            if (minus / norm < best_rate) {
                best_rate = minus / norm;
                best_d = -d;
                best_a = -a;
                best_fixed = fixed;
            }
        };

        std::vector<Eigen::Index> fixed;
        if (static_cast<Eigen::Index>(zero_rows.size()) == p) {
            // Edge j releases basis row j: d = (X_h)^{-1} e_j.
            for (Eigen::Index j = 0; j < p; ++j) {
                fixed.clear();
                for (Eigen::Index jj = 0; jj < p; ++jj)
                    if (jj != j) fixed.push_back(vertex.basis[static_cast<std::size_t>(jj)]);
                consider(vertex.block_inverse.col(j), fixed);
            }
        } else if (p == 1) {
            consider(Eigen::VectorXd::Ones(1), fixed);
        } else {
            const auto z = static_cast<Eigen::Index>(zero_rows.size());
            std::vector<Eigen::Index> pick(static_cast<std::size_t>(p - 1));
            std::iota(pick.begin(), pick.end(), Eigen::Index{0});
            Eigen::MatrixXd held(p - 1, p);
            for (;;) {
                fixed.clear();
                for (Eigen::Index k = 0; k < p - 1; ++k) {
                    fixed.push_back(zero_rows[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])]);
                    held.row(k) = X.row(fixed.back());
                }
                Eigen::FullPivLU<Eigen::MatrixXd> lu(held);
                if (lu.rank() == p - 1) consider(lu.kernel().col(0).normalized(), fixed);
                Eigen::Index k = p - 2;
                while (k >= 0 && pick[static_cast<std::size_t>(k)] == z - (p - 1) + k) --k;
                if (k < 0) break;
                ++pick[static_cast<std::size_t>(k)];
                for (Eigen::Index kk = k + 1; kk < p - 1; ++kk)
                    pick[static_cast<std::size_t>(kk)] = pick[static_cast<std::size_t>(kk - 1)] + 1;
            }
        }
        const double slope_tol = 1e-10 * (1.0 + X.cwiseAbs().maxCoeff()) * std::sqrt(static_cast<double>(m));
        if (best_d.size() == 0 || best_rate * best_d.norm() > -slope_tol) break;  // optimal vertex

        if (fit.pivots >= pivot_budget) {
            throw SolverError("quantile regression did not converge within " + std::to_string(pivot_budget) +
                                  " pivots",
                              vertex.coef, -best_rate);
        }
        ++fit.pivots;

        // Exact line search: walk breakpoints until the slope turns nonnegative.
        double slope = best_rate * best_d.norm();
        breaks.clear();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (best_a(i) == 0.0 || std::abs(r(i)) <= ztol) continue;
            double s = r(i) / best_a(i);
            if (s > 0.0) breaks.emplace_back(s, i);
        }
        // Min-heap: usually only a few breakpoints are visited.
        auto later = [](const auto& l, const auto& r) { return l > r; };
        std::make_heap(breaks.begin(), breaks.end(), later);
        Eigen::Index entering = -1;
        while (!breaks.empty()) {
            std::pop_heap(breaks.begin(), breaks.end(), later);
            const Eigen::Index i = breaks.back().second;
            breaks.pop_back();
            slope += std::abs(best_a(i));
            if (slope >= 0.0) {
                entering = i;
                break;
            }
        }
        if (entering < 0) {
            throw SolverError("quantile regression objective is unbounded along an edge", vertex.coef,
                              -best_rate);
        }
        std::vector<Eigen::Index> next_basis = best_fixed;
        next_basis.push_back(entering);
        Vertex next;
        if (!make_vertex(prob, std::move(next_basis), next)) {
            throw SolverError("quantile regression pivot produced a singular basis", vertex.coef, -best_rate);
        }
        vertex = std::move(next);
    }

    fit.coef = vertex.coef;
    fit.objective = check_loss(fit.coef, prob);
    // The smoothing phase can land below the vertex objective only by rounding.
    double start_obj = check_loss(start, prob);
    if (start_obj < fit.objective) {
        fit.coef = start;
        fit.objective = start_obj;
    }
    return fit;
}

}  // namespace nafe
