#include "rep/csv.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "rep/errors.hpp"

namespace rep {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
      field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  return out;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split(line));
  }
  if (rows.empty()) throw IoError("empty file " + path);
  return rows;
}

bool header_row(const std::vector<std::string>& row) {
  for (const auto& f : row)
    if (!is_number(f)) return true;
  return false;
}

}  // namespace

Matrix read_covariates_csv(const std::string& path) {
  auto rows = read_rows(path);
  std::size_t first_data = 0;
  std::size_t skip_cols = 0;
  if (header_row(rows[0])) {
    first_data = 1;
    if (!rows[0].empty() && lower(rows[0][0]) == "unit_id") skip_cols = 1;
  }
  if (first_data >= rows.size()) throw IoError("no data rows in " + path);
  const std::size_t j = rows[first_data].size() - skip_cols;
  if (j == 0) throw IoError("no covariate columns in " + path);
  Matrix x(rows.size() - first_data, j);
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    if (rows[r].size() != j + skip_cols)
      throw IoError("ragged row in " + path);
    for (std::size_t c = 0; c < j; ++c)
      x(r - first_data, c) = std::stod(rows[r][c + skip_cols]);
  }
  return x;
}

std::vector<int> read_assignment_csv(const std::string& path) {
  auto rows = read_rows(path);
  std::size_t first_data = header_row(rows[0]) ? 1 : 0;
  std::vector<int> z;
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    const auto& row = rows[r];
    z.push_back(std::stoi(row.back()));  // last column; unit_id may lead
  }
  return z;
}

EstimationData read_estimation_csv(const std::string& path) {
  auto rows = read_rows(path);
  if (!header_row(rows[0]))
    throw IoError("estimation file needs a header naming z and y: " + path);
  std::vector<std::string> header;
  for (const auto& h : rows[0]) header.push_back(lower(h));
  auto find = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int z_col = find("z");
  const int y_col = find("y");
  if (z_col < 0 || y_col < 0)
    throw IoError("estimation file must have z and y columns: " + path);
  std::vector<int> x_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) == z_col || static_cast<int>(c) == y_col) continue;
    if (header[c] == "unit_id") continue;
    x_cols.push_back(static_cast<int>(c));
  }

  EstimationData data;
  const std::size_t n = rows.size() - 1;
  data.z.resize(n);
  data.y.resize(n);
  data.x = Matrix(n, x_cols.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw IoError("ragged row in " + path);
    data.z[r - 1] = std::stoi(row[z_col]);
    data.y[r - 1] = std::stod(row[y_col]);
    for (std::size_t c = 0; c < x_cols.size(); ++c)
      data.x(r - 1, c) = std::stod(row[x_cols[c]]);
  }
  return data;
}

Matrix read_contrast_csv(const std::string& path) {
  auto rows = read_rows(path);
  std::size_t first_data = header_row(rows[0]) ? 1 : 0;
  const std::size_t q = rows[first_data].size();
  Matrix g(rows.size() - first_data, q);
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    if (rows[r].size() != q) throw IoError("ragged contrast row in " + path);
    for (std::size_t c = 0; c < q; ++c)
      g(r - first_data, c) = std::stod(rows[r][c]);
  }
  return g;
}

void write_assignment_csv(const std::vector<int>& assignment,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "unit_id,z\n";
  for (std::size_t i = 0; i < assignment.size(); ++i)
    out << (i + 1) << ',' << assignment[i] << '\n';
  if (!out.good()) throw IoError("write failure on " + path);
}

}  // namespace rep
