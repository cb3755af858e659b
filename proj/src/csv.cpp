#include "soupforge/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "soupforge/errors.hpp"

namespace soupforge {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::OpenFailed, "cannot open for write: " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) os << ',';
    os << header[i];
  }
  os << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw Error("csv row width does not match header: " + path.string());
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
  os.flush();
  if (!os) throw IoError(IoError::Kind::WriteFailed, "write failed: " + path.string());
}

namespace {
std::vector<std::string> split_fields(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string field;
  while (std::getline(ss, field, ',')) {
    // trim spaces
    std::size_t b = field.find_first_not_of(" \t");
    std::size_t e = field.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}
}  // namespace

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& f : split_fields(s)) {
    if (f.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(f, &used);
      if (used != f.size()) throw std::invalid_argument(f);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("bad integer in list: '" + f + "'");
    }
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : split_fields(s)) {
    if (f.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(f, &used);
      if (used != f.size()) throw std::invalid_argument(f);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("bad number in list: '" + f + "'");
    }
  }
  return out;
}

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace soupforge
