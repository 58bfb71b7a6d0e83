#include "ovabench/csv.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace ovabench::csv {

std::string format_double(double value)
{
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
    return {buf.data(), res.ptr};
}

double parse_double(std::string_view text)
{
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return value;
}

long long parse_int(std::string_view text)
{
    long long value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string> split_line(std::string_view line)
{
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::size_t Table::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw std::invalid_argument("csv: missing column '" + std::string(name) + "'");
}

Table read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    Table table;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path.string() + ": missing header");
    }
    table.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split_line(line);
        if (fields.size() != table.header.size()) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(table.rows.size() + 1) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

std::ofstream open_with_header(const std::filesystem::path& path, const std::vector<std::string>& header)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    out << '\n';
    return out;
}

}  // namespace ovabench::csv
