#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace soupforge {

// All report reals are printed with 17 significant digits so a reader gets
// the exact float64 back.
std::string fmt_real(double v);

// Rows of pre-formatted fields; writes header + rows, comma separated,
// LF-terminated, UTF-8.
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::vector<int> parse_int_list(const std::string& s);        // "0,2,6"
std::vector<double> parse_real_list(const std::string& s);

std::string join_ints(const std::vector<int>& v, char sep);

}  // namespace soupforge
