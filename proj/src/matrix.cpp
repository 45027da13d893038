#include "groupsynth/matrix.hpp"

#include <algorithm>
#include <string>

#include "groupsynth/error.hpp"

namespace groupsynth {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw Error(ErrorKind::DimensionMismatch, "row width " + std::to_string(values.size()) +
                                                  " does not match matrix width " +
                                                  std::to_string(cols_));
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void Matrix::append_rows(const Matrix& other) {
  if (other.rows_ == 0) return;
  if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
  if (other.cols_ != cols_) {
    throw Error(ErrorKind::DimensionMismatch, "cannot stack matrices of width " +
                                                  std::to_string(cols_) + " and " +
                                                  std::to_string(other.cols_));
  }
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  rows_ += other.rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace groupsynth
