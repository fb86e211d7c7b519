#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace latdyn::csv {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);
// Parses a full field as a double; returns false on trailing garbage.
bool parse_double(std::string_view field, double& out);

std::vector<std::string_view> split_fields(std::string_view line);
std::string_view trim(std::string_view s);

// Numeric table with a header row and optional leading '#' comment lines.
struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;

  Eigen::Index column(std::string_view name) const;  // -1 when absent
};

std::string format_table(const std::vector<std::string>& header, const Eigen::MatrixXd& values,
                         const std::vector<std::string>& comments = {});
Table parse_table(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace latdyn::csv
