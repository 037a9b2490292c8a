#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nafe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Data errors: the input file or dataset is unusable.
class DataError : public Error {
public:
    using Error::Error;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& message, std::size_t row)
        : DataError(message), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class BalanceError : public DataError {
public:
    BalanceError(const std::string& message, std::vector<std::string> offending)
        : DataError(message), offending_(std::move(offending)) {}
    const std::vector<std::string>& offending_units() const noexcept { return offending_; }

private:
    std::vector<std::string> offending_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside its mathematical domain (tau outside (0,1), bad bandwidth, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Numerical failures.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularDesignError : public NumericalError {
public:
    SingularDesignError(const std::string& message, std::vector<std::string> units)
        : NumericalError(message), units_(std::move(units)) {}
    const std::vector<std::string>& units() const noexcept { return units_; }

private:
    std::vector<std::string> units_;
};

}  // namespace nafe
