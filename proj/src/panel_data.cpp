#include "nafe/panel_data.hpp"

#include "nafe/errors.hpp"
#include "nafe/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace nafe {

namespace text {

std::string format_double(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) {
        int len = std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf, static_cast<std::size_t>(len));
    }
    return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.emplace_back(trim(cur));
    return fields;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace text

namespace {

std::string join(const std::vector<std::string>& items, std::size_t limit = 10) {
    std::string out;
    for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    if (items.size() > limit) out += ", ... (" + std::to_string(items.size()) + " total)";
    return out;
}

// Numeric order when every label is a number, lexicographic otherwise.
std::vector<std::string> sorted_labels(std::vector<std::string> labels) {
    bool numeric = std::all_of(labels.begin(), labels.end(),
                               [](const std::string& s) { return text::parse_double(s).has_value(); });
    if (numeric) {
        std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
            return *text::parse_double(a) < *text::parse_double(b);
        });
    } else {
        std::sort(labels.begin(), labels.end());
    }
    return labels;
}

}  // namespace

PanelDataset::PanelDataset(std::vector<std::string> unit_ids, std::vector<std::string> time_ids,
                           Eigen::VectorXd y, Eigen::MatrixXd x,
                           std::vector<std::string> regressor_names, bool has_intercept_column)
    : unit_ids_(std::move(unit_ids)),
      time_ids_(std::move(time_ids)),
      y_(std::move(y)),
      x_(std::move(x)),
      regressor_names_(std::move(regressor_names)),
      has_intercept_(has_intercept_column) {
    const auto rows = static_cast<Eigen::Index>(n() * T());
    if (n() == 0 || T() == 0) throw DimensionError("panel must have at least one unit and one period");
    if (x_.cols() < 1) throw DimensionError("panel needs at least one regressor column");
    if (y_.size() != rows || x_.rows() != rows)
        throw DimensionError("outcome/regressor arrays do not match n*T = " + std::to_string(rows));
    if (regressor_names_.size() != K())
        throw DimensionError("expected " + std::to_string(K()) + " regressor names");
    if (!y_.allFinite() || !x_.allFinite()) throw DataError("panel contains non-finite values");
    if (has_intercept_ && !(x_.col(0).array() == 1.0).all())
        throw DataError("intercept column is not identically 1");
}

PanelDataset PanelDataset::select_units(const std::vector<std::size_t>& units) const {
    const auto t_len = static_cast<Eigen::Index>(T());
    Eigen::VectorXd ys(static_cast<Eigen::Index>(units.size()) * t_len);
    Eigen::MatrixXd xs(ys.size(), x_.cols());
    std::vector<std::string> ids;
    ids.reserve(units.size());
    std::unordered_map<std::size_t, int> seen;
    for (std::size_t j = 0; j < units.size(); ++j) {
        std::size_t i = units.at(j);
        if (i >= n()) throw DimensionError("unit index out of range");
        ys.segment(static_cast<Eigen::Index>(j) * t_len, t_len) = unit_response(i);
        xs.middleRows(static_cast<Eigen::Index>(j) * t_len, t_len) = unit_design(i);
        int count = seen[i]++;
        ids.push_back(count == 0 ? unit_ids_[i] : unit_ids_[i] + "#" + std::to_string(j));
    }
    return PanelDataset(std::move(ids), time_ids_, std::move(ys), std::move(xs), regressor_names_,
                        has_intercept_);
}

ColumnMap ColumnMap::positional(const std::vector<std::string>& header) {
    if (header.size() < 4)
        throw SchemaError("expected at least 4 columns (unit, time, outcome, regressor), found " +
                          std::to_string(header.size()));
    ColumnMap map;
    map.unit = header[0];
    map.time = header[1];
    map.outcome = header[2];
    map.regressors.assign(header.begin() + 3, header.end());
    return map;
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("missing header row in " + path.string());
    return text::split_csv_line(line);
}

PanelDataset load_csv(const std::filesystem::path& path, const ColumnMap& columns) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path.string());
    return read_csv(in, columns);
}

PanelDataset read_csv(std::istream& in, const ColumnMap& columns) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const std::vector<std::string> header = text::split_csv_line(line);

    auto find_col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t unit_col = find_col(columns.unit);
    const std::size_t time_col = find_col(columns.time);
    const std::size_t y_col = find_col(columns.outcome);
    std::vector<std::string> reg_names = columns.regressors;
    if (reg_names.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != unit_col && c != time_col && c != y_col) reg_names.push_back(header[c]);
    }
    if (reg_names.empty() && !columns.add_intercept) throw SchemaError("no regressor columns");
    std::vector<std::size_t> reg_cols;
    for (const auto& name : reg_names) reg_cols.push_back(find_col(name));

    struct Record {
        std::string unit, time;
        double y;
        std::vector<double> x;
        std::size_t row;
    };
    std::vector<Record> records;
    std::size_t row = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty()) continue;
        auto fields = text::split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                 " fields, found " + std::to_string(fields.size()),
                             row);
        auto number = [&](std::size_t c) {
            auto v = text::parse_double(fields[c]);
            if (!v || !std::isfinite(*v))
                throw ParseError("row " + std::to_string(row) + ": non-numeric value '" + fields[c] +
                                     "' in column '" + header[c] + "'",
                                 row);
            return *v;
        };
        Record rec{fields[unit_col], fields[time_col], number(y_col), {}, row};
        for (std::size_t c : reg_cols) rec.x.push_back(number(c));
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw SchemaError("no data rows");

    // Balance: every unit observed exactly once at every time label.
    std::map<std::string, std::map<std::string, std::size_t>> by_unit;
    std::vector<std::string> units, times;
    std::map<std::string, bool> time_seen;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        auto [it, fresh] = by_unit.try_emplace(rec.unit);
        if (fresh) units.push_back(rec.unit);
        if (!it->second.emplace(rec.time, r).second)
            throw BalanceError("duplicate (unit, time) key (" + rec.unit + ", " + rec.time + ") at row " +
                                   std::to_string(rec.row),
                               {rec.unit});
        if (time_seen.emplace(rec.time, true).second) times.push_back(rec.time);
    }
    std::vector<std::string> offending;
    for (const auto& [unit, obs] : by_unit)
        if (obs.size() != times.size()) offending.push_back(unit);
    if (!offending.empty()) {
        offending = sorted_labels(std::move(offending));
        throw BalanceError("unbalanced panel: " + std::to_string(offending.size()) +
                               " unit(s) not observed in all " + std::to_string(times.size()) +
                               " periods: " + join(offending),
                           offending);
    }

    units = sorted_labels(std::move(units));
    times = sorted_labels(std::move(times));
    const std::size_t n = units.size(), T = times.size();
    const std::size_t offset = columns.add_intercept ? 1 : 0;
    const std::size_t K = reg_cols.size() + offset;
    Eigen::VectorXd y(static_cast<Eigen::Index>(n * T));
    Eigen::MatrixXd x(y.size(), static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& obs = by_unit.at(units[i]);
        for (std::size_t t = 0; t < T; ++t) {
            const auto& rec = records[obs.at(times[t])];
            const auto r = static_cast<Eigen::Index>(i * T + t);
            y(r) = rec.y;
            if (offset) x(r, 0) = 1.0;
            for (std::size_t k = 0; k < rec.x.size(); ++k) x(r, static_cast<Eigen::Index>(k + offset)) = rec.x[k];
        }
    }
    if (columns.add_intercept) reg_names.insert(reg_names.begin(), kInterceptName);
    return PanelDataset(std::move(units), std::move(times), std::move(y), std::move(x), std::move(reg_names),
                        columns.add_intercept);
}

void write_csv(const PanelDataset& d, std::ostream& out) {
    const std::size_t first = d.has_intercept_column() ? 1 : 0;
    out << "unit,time,y";
    for (std::size_t k = first; k < d.K(); ++k) out << ',' << d.regressor_names()[k];
    out << '\n';
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t t = 0; t < d.T(); ++t) {
            out << d.unit_ids()[i] << ',' << d.time_ids()[t] << ',' << text::format_double(d.y(i, t));
            for (std::size_t k = first; k < d.K(); ++k) out << ',' << text::format_double(d.x(i, t, k));
            out << '\n';
        }
    }
}

void write_csv(const PanelDataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_csv(d, out);
}

double gram_condition_number(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    if (x.rows() < x.cols()) return std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
    const auto& s = svd.singularValues();
    double smin = s(s.size() - 1), smax = s(0);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    double ratio = smax / smin;
    return ratio * ratio;
}

ValidationReport validate(const PanelDataset& d) {
    ValidationReport report;
    auto add = [&](Severity sev, std::string scope, std::string message) {
        if (sev == Severity::Error) report.ok = false;
        report.issues.push_back({sev, std::move(scope), std::move(message)});
    };
    if (d.T() < d.K()) {
        add(Severity::Error, "global",
            "T < K: " + std::to_string(d.T()) + " periods cannot identify " + std::to_string(d.K()) +
                " unit-level coefficients");
        return report;
    }
    for (std::size_t i = 0; i < d.n(); ++i) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.unit_design(i));
        if (qr.rank() < static_cast<Eigen::Index>(d.K())) {
            add(Severity::Error, d.unit_ids()[i],
                "per-unit collinearity: regressor block has rank " + std::to_string(qr.rank()) + " < K = " +
                    std::to_string(d.K()));
            continue;
        }
        double cond = gram_condition_number(d.unit_design(i));
        if (cond > kConditionWarning) {
            add(Severity::Warning, d.unit_ids()[i],
                "near-singular Gram matrix, condition number " + text::format_double(cond));
        }
    }
    return report;
}

std::string format_report(const ValidationReport& report) {
    std::ostringstream out;
    out << (report.ok ? "validation ok" : "validation failed") << " (" << report.issues.size() << " issue(s))\n";
    for (const auto& issue : report.issues)
        out << "  [" << (issue.severity == Severity::Error ? "error" : "warning") << "] " << issue.scope << ": "
            << issue.message << '\n';
    return out.str();
}

Eigen::VectorXd column_means(const PanelDataset& d) {
    Eigen::VectorXd means = d.x().colwise().mean().transpose();
    if (d.has_intercept_column()) means(0) = 1.0;
    return means;
}

}  // namespace nafe
