#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dtrade::csv {

/// RFC-4180 table with a mandatory header row.
class Table {
public:
    Table() = default;
    Table(std::string source, std::vector<std::string> header,
          std::vector<std::vector<std::string>> rows);

    const std::string& source() const { return source_; }
    const std::vector<std::string>& header() const { return header_; }
    std::size_t size() const { return rows_.size(); }

    bool has_column(std::string_view name) const;
    /// Throws SchemaError when a required column is absent.
    void require(const std::vector<std::string>& columns) const;

    const std::string& at(std::size_t row, std::string_view column) const;
    /// Row numbers in errors are 1-based file lines (header is line 1).
    double number(std::size_t row, std::string_view column) const;
    double non_negative(std::size_t row, std::string_view column) const;
    int integer(std::size_t row, std::string_view column) const;
    bool flag(std::size_t row, std::string_view column) const;

private:
    std::size_t index_of(std::string_view column) const;

    std::string source_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

Table parse(std::string_view text, const std::string& source);
Table read_file(const std::string& path);

/// Streaming writer. Fields are quoted only when needed; line endings are "\n".
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    Writer& row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

std::string quote(std::string_view field);

}  // namespace dtrade::csv
