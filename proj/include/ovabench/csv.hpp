#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace ovabench::csv {

/// 17 significant digits: parses back to the identical double.
[[nodiscard]] std::string format_double(double value);

[[nodiscard]] double parse_double(std::string_view text);
[[nodiscard]] long long parse_int(std::string_view text);

/// Splits one line on commas; no quoting support (none of our files need it).
[[nodiscard]] std::vector<std::string> split_line(std::string_view line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws if absent.
    [[nodiscard]] std::size_t column(std::string_view name) const;
};

[[nodiscard]] Table read(const std::filesystem::path& path);

/// Opens `path` for writing and emits the header line; throws on failure.
[[nodiscard]] std::ofstream open_with_header(const std::filesystem::path& path, const std::vector<std::string>& header);

}  // namespace ovabench::csv
