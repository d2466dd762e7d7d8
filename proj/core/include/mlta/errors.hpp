#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlta {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t col)
        : Error(what + " (row " + std::to_string(row) + ", col " + std::to_string(col) + ")"),
          row_(row), col_(col) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

class EncodingError : public Error {
public:
    EncodingError(std::string column, std::string label)
        : Error("unmapped label '" + label + "' in column '" + column + "'"),
          column_(std::move(column)), label_(std::move(label)) {}

    const std::string& column() const noexcept { return column_; }
    const std::string& label() const noexcept { return label_; }

private:
    std::string column_;
    std::string label_;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// A mixture component's expected size fell below one observation.
class DegenerateGroup : public Error {
public:
    DegenerateGroup(int group, double expected_size)
        : Error("group " + std::to_string(group + 1) + " degenerated (expected size " +
                std::to_string(expected_size) + ")"),
          group_(group) {}

    /// Zero-based group index.
    int group() const noexcept { return group_; }

private:
    int group_;
};

class AllStartsFailed : public Error {
public:
    using Error::Error;
};

}  // namespace mlta
