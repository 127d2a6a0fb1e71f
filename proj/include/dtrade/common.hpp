#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dtrade {

using Year = int;

/// Domain failure: bad data, violated precondition, missing upstream stage.
/// The CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A CSV input that does not match its documented schema.
class SchemaError : public Error {
public:
    SchemaError(const std::string& file, std::size_t row, const std::string& column,
                const std::string& what)
        : Error(file + ":" + std::to_string(row) + ": column '" + column + "': " + what),
          file_(file), row_(row), column_(column) {}

    const std::string& file() const { return file_; }
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::string file_;
    std::size_t row_;
    std::string column_;
};

/// Bad invocation (flags, config keys). Exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dtrade
