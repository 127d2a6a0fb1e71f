#include "dtrade/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dtrade/common.hpp"

namespace dtrade::csv {

Table::Table(std::string source, std::vector<std::string> header,
             std::vector<std::vector<std::string>> rows)
    : source_(std::move(source)), header_(std::move(header)), rows_(std::move(rows)) {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (!index_.emplace(header_[i], i).second) {
            throw SchemaError(source_, 1, header_[i], "duplicate column");
        }
    }
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        if (rows_[r].size() != header_.size()) {
            throw SchemaError(source_, r + 2, "*",
                              "expected " + std::to_string(header_.size()) + " fields, found " +
                                  std::to_string(rows_[r].size()));
        }
    }
}

bool Table::has_column(std::string_view name) const { return index_.find(name) != index_.end(); }

void Table::require(const std::vector<std::string>& columns) const {
    for (const auto& c : columns) {
        if (!has_column(c)) throw SchemaError(source_, 1, c, "missing required column");
    }
}

std::size_t Table::index_of(std::string_view column) const {
    auto it = index_.find(column);
    if (it == index_.end()) throw SchemaError(source_, 1, std::string(column), "missing column");
    return it->second;
}

const std::string& Table::at(std::size_t row, std::string_view column) const {
    return rows_.at(row)[index_of(column)];
}

double Table::number(std::size_t row, std::string_view column) const {
    const std::string& s = at(row, column);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw SchemaError(source_, row + 2, std::string(column), "not a finite number: '" + s + "'");
    }
    return v;
}

double Table::non_negative(std::size_t row, std::string_view column) const {
    double v = number(row, column);
    if (v < 0.0) throw SchemaError(source_, row + 2, std::string(column), "negative monetary value");
    return v;
}

int Table::integer(std::size_t row, std::string_view column) const {
    const std::string& s = at(row, column);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw SchemaError(source_, row + 2, std::string(column), "not an integer: '" + s + "'");
    }
    return v;
}

bool Table::flag(std::size_t row, std::string_view column) const {
    const std::string& s = at(row, column);
    if (s == "0") return false;
    if (s == "1") return true;
    throw SchemaError(source_, row + 2, std::string(column), "boolean must be 0 or 1, found '" + s + "'");
}

Table parse(std::string_view text, const std::string& source) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // Blank lines are skipped rather than read as one empty field.
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };

    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started || !field.empty()) {
                    throw SchemaError(source, line, "*", "quote inside unquoted field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                end_record();
                ++line;
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw SchemaError(source, line, "*", "unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();

    if (records.empty()) throw SchemaError(source, 1, "*", "header row required");
    std::vector<std::string> header = std::move(records.front());
    records.erase(records.begin());
    return Table(source, std::move(header), std::move(records));
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

Writer& Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << quote(fields[i]);
    }
    out_ << '\n';
    return *this;
}

}  // namespace dtrade::csv
