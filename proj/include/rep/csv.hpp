#pragma once

#include <string>
#include <vector>

#include "rep/matrix.hpp"

namespace rep {

// Covariate file: header row `unit_id,x1,...,xJ`; the unit_id column is
// optional. Returns the N x J matrix in row order.
Matrix read_covariates_csv(const std::string& path);

// One assignment label per row; a header row and a unit_id column are both
// tolerated. Labels are 1..Q, or 0/1 for two arms.
std::vector<int> read_assignment_csv(const std::string& path);

// Estimation file: header `unit_id,z,y,x1,...,xJ` (unit_id optional; column
// order by name).
struct EstimationData {
  std::vector<int> z;
  Vector y;
  Matrix x;
};
EstimationData read_estimation_csv(const std::string& path);

// Headerless numeric rows of a contrast matrix.
Matrix read_contrast_csv(const std::string& path);

void write_assignment_csv(const std::vector<int>& assignment,
                          const std::string& path);

}  // namespace rep
