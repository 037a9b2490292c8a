#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace nafe {

/// Balanced n x T panel with K regressors per observation.
///
/// Observations are stored unit-major: row i*T + t of `x()` and entry
/// i*T + t of `y()` hold unit i at period t, so each unit's T x K design is
/// a contiguous block. When `has_intercept_column()` is true, column 0 of
/// the design is identically 1.
class PanelDataset {
public:
    /// Throws DimensionError / DataError when the invariants do not hold.
    PanelDataset(std::vector<std::string> unit_ids, std::vector<std::string> time_ids,
                 Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<std::string> regressor_names,
                 bool has_intercept_column);

    std::size_t n() const noexcept { return unit_ids_.size(); }
    std::size_t T() const noexcept { return time_ids_.size(); }
    std::size_t K() const noexcept { return static_cast<std::size_t>(x_.cols()); }

    const std::vector<std::string>& unit_ids() const noexcept { return unit_ids_; }
    const std::vector<std::string>& time_ids() const noexcept { return time_ids_; }
    const std::vector<std::string>& regressor_names() const noexcept { return regressor_names_; }
    bool has_intercept_column() const noexcept { return has_intercept_; }

    const Eigen::VectorXd& y() const noexcept { return y_; }
    const Eigen::MatrixXd& x() const noexcept { return x_; }

    double y(std::size_t i, std::size_t t) const { return y_(row(i, t)); }
    double x(std::size_t i, std::size_t t, std::size_t k) const { return x_(row(i, t), k); }

    /// T x K design block of unit i.
    auto unit_design(std::size_t i) const {
        return x_.middleRows(static_cast<Eigen::Index>(i * T()), static_cast<Eigen::Index>(T()));
    }
    auto unit_response(std::size_t i) const {
        return y_.segment(static_cast<Eigen::Index>(i * T()), static_cast<Eigen::Index>(T()));
    }

    /// New panel made of the listed units (repeats allowed), relabelled
    /// "<original>#<position>" when a unit appears more than once.
    PanelDataset select_units(const std::vector<std::size_t>& units) const;

private:
    Eigen::Index row(std::size_t i, std::size_t t) const {
        return static_cast<Eigen::Index>(i * T() + t);
    }

    std::vector<std::string> unit_ids_;
    std::vector<std::string> time_ids_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd x_;
    std::vector<std::string> regressor_names_;
    bool has_intercept_;
};

inline constexpr const char* kInterceptName = "(Intercept)";

/// Which CSV columns hold the unit label, time label, outcome and regressors.
/// Empty `regressors` means "every remaining column, in file order".
struct ColumnMap {
    std::string unit = "unit";
    std::string time = "time";
    std::string outcome = "y";
    std::vector<std::string> regressors;
    bool add_intercept = true;

    /// Columns 0, 1, 2 are unit, time, outcome; all others are regressors.
    static ColumnMap positional(const std::vector<std::string>& header);
};

/// Reads a long-format panel `unit,time,y,x1,...`. Rows may come in any
/// order; the result is sorted by (unit, time), numerically when every label
/// parses as a number and lexicographically otherwise.
PanelDataset load_csv(const std::filesystem::path& path, const ColumnMap& columns = {});
PanelDataset read_csv(std::istream& in, const ColumnMap& columns = {});
/// Header of a CSV stream, for building a ColumnMap before loading.
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

/// Writes the panel in the same long format with 17 significant digits.
/// An intercept column is not written; load_csv re-creates it.
void write_csv(const PanelDataset& d, std::ostream& out);
void write_csv(const PanelDataset& d, const std::filesystem::path& path);

enum class Severity { Warning, Error };

struct ValidationIssue {
    Severity severity;
    std::string scope;  // unit label, or "global"
    std::string message;

    friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

struct ValidationReport {
    bool ok = true;
    std::vector<ValidationIssue> issues;

    friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

/// Gram condition numbers above this produce a warning.
inline constexpr double kConditionWarning = 1e10;

/// Checks T >= K and per-unit full column rank of the T x K design.
ValidationReport validate(const PanelDataset& d);

std::string format_report(const ValidationReport& report);

/// (1/(nT)) sum_i sum_t X_it.
Eigen::VectorXd column_means(const PanelDataset& d);

/// Condition number of X'X for a T x K block (infinity when rank deficient).
double gram_condition_number(const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace nafe
