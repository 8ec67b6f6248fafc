#include "climatune/matrix.hpp"

#include <algorithm>
#include <string>

#include "climatune/error.hpp"

namespace climatune {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), values_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw ModelError("matrix shape must be positive, got " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace climatune
