#pragma once

#include "ckada/error.hpp"

#include <Eigen/Core>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ckada::csv {

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorCode::io, "cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        fail(ErrorCode::io, "write failed for '" + path + "'");
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Splits text into lines, accepting LF or CRLF. Trailing blank lines are
/// dropped; the returned line numbers are 1-based file lines.
inline std::vector<std::pair<std::size_t, std::string_view>> lines(std::string_view text)
{
    std::vector<std::pair<std::size_t, std::string_view>> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    if (text.starts_with("\xEF\xBB\xBF"))
        pos = 3;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        ++line_no;
        out.emplace_back(line_no, trim(text.substr(pos, end - pos)));
        pos = end + 1;
    }
    while (!out.empty() && out.back().second.empty())
        out.pop_back();
    return out;
}

inline double parse_double(std::string_view field, std::size_t line, std::size_t column)
{
    field = trim(field);
    if (!field.empty() && field.front() == '+')
        field.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        fail(ErrorCode::parse,
             "line " + std::to_string(line) + ", column " + std::to_string(column) + ": '"
                 + std::string(field) + "' is not a number");
    return value;
}

inline long long parse_integer(std::string_view field, std::size_t line, std::size_t column)
{
    field = trim(field);
    if (!field.empty() && field.front() == '+')
        field.remove_prefix(1);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        fail(ErrorCode::parse,
             "line " + std::to_string(line) + ", column " + std::to_string(column) + ": '"
                 + std::string(field) + "' is not an integer");
    return value;
}

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return fields;
}

/// Parses a numeric CSV table. Errors: ParseError(line, column), RaggedRows(line).
inline Eigen::MatrixXd parse_matrix(std::string_view text, bool header)
{
    auto rows = lines(text);
    std::size_t first = header ? 1 : 0;
    std::vector<std::vector<double>> values;
    std::size_t cols = 0;
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto [line_no, line] = rows[r];
        if (line.empty())
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": empty row");
        auto fields = split(line);
        if (values.empty())
            cols = fields.size();
        else if (fields.size() != cols)
            fail(ErrorCode::ragged_rows, "line " + std::to_string(line_no) + " has "
                                             + std::to_string(fields.size()) + " fields, expected "
                                             + std::to_string(cols));
        std::vector<double> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c)
            row[c] = parse_double(fields[c], line_no, c + 1);
        values.push_back(std::move(row));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < values.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r][c];
    return m;
}

/// Shortest decimal form that round-trips to the same double.
inline void append_double(std::string& out, double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

inline std::string format_matrix(const Eigen::MatrixXd& m)
{
    std::string out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c)
                out += ',';
            append_double(out, m(r, c));
        }
        out += '\n';
    }
    return out;
}

inline void write_matrix(const std::string& path, const Eigen::MatrixXd& m)
{
    write_file(path, format_matrix(m));
}

} // namespace ckada::csv
