#pragma once

#include "driftbench/feature_data.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace driftbench {

// Shortest representation that parses back to the same double.
std::string format_real(double value);
double parse_real(std::string_view text);

std::vector<std::string_view> split_csv_line(std::string_view line);

// Plain numeric matrix, one row per line, no header.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace driftbench
