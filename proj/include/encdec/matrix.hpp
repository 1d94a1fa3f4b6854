// Copyright 2026 The encdec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "encdec/errors.hpp"

namespace encdec {

// Dense row-major matrix. Value type; copies are deep.
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix buffer of length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }
  BasicMatrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  // Appends the rows of `other`. An empty matrix adopts the column count.
  void append_rows(const BasicMatrix& other) {
    if (other.rows_ == 0) return;
    if (rows_ == 0) cols_ = other.cols_;
    if (other.cols_ != cols_) {
      throw ShapeError("append_rows: " + std::to_string(cols_) + " vs " +
                       std::to_string(other.cols_) + " columns");
    }
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
  }

  void append_row(std::span<const T> values) {
    if (rows_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw ShapeError("append_row: width mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  void reserve_rows(std::size_t n) { data_.reserve(n * cols_); }

  BasicMatrix slice_rows(std::size_t begin, std::size_t count) const {
    if (begin + count > rows_) throw ShapeError("slice_rows out of range");
    return BasicMatrix(count, cols_,
                       std::vector<T>(data_.begin() + begin * cols_,
                                      data_.begin() + (begin + count) * cols_));
  }

  BasicMatrix slice_cols(std::size_t begin, std::size_t count) const {
    if (begin + count > cols_) throw ShapeError("slice_cols out of range");
    BasicMatrix out(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r) {
      std::copy_n(data_.begin() + r * cols_ + begin, count, out.data_.begin() + r * count);
    }
    return out;
  }

  // Writes `block` into columns [begin, begin + block.cols()).
  void set_cols(std::size_t begin, const BasicMatrix& block) {
    if (block.rows_ != rows_ || begin + block.cols_ > cols_) {
      throw ShapeError("set_cols out of range");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      std::copy_n(block.data_.begin() + r * block.cols_, block.cols_,
                  data_.begin() + r * cols_ + begin);
    }
  }

  template <typename U>
  BasicMatrix<U> cast() const {
    return BasicMatrix<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicMatrix& a, const BasicMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;

inline std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename T>
std::string shape_string(const BasicMatrix<T>& m) {
  return shape_string(m.rows(), m.cols());
}

}  // namespace encdec
