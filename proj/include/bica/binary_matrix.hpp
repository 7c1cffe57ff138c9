#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bica/errors.hpp"

namespace bica {

using BinaryVector = std::vector<std::uint8_t>;

// Dense 0/1 matrix, bit-packed row-major (rows = monitors or sources,
// columns = time slots). Immutable once built; construct through Builder or
// the parse/read functions so the trailing padding bits of every row word
// stay zero and operator== can compare storage directly.
class BinaryMatrix {
 public:
  class Builder;

  BinaryMatrix() = default;

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  bool get(std::size_t r, std::size_t c) const noexcept {
    return (bits_[r * words_per_row_ + (c >> 6)] >> (c & 63)) & 1u;
  }

  // Column c as a bitmask with bit r = row r. Requires rows() <= 64.
  std::uint64_t column_mask(std::size_t c) const {
    if (rows_ > 64) throw CapacityError("column_mask requires at most 64 rows");
    std::uint64_t mask = 0;
    for (std::size_t r = 0; r < rows_; ++r)
      mask |= static_cast<std::uint64_t>(get(r, c)) << r;
    return mask;
  }

  std::size_t count_ones() const noexcept {
    std::size_t total = 0;
    for (std::uint64_t w : bits_) total += std::popcount(w);
    return total;
  }

  BinaryVector row(std::size_t r) const {
    BinaryVector out(cols_);
    for (std::size_t c = 0; c < cols_; ++c) out[c] = get(r, c);
    return out;
  }

  BinaryVector column(std::size_t c) const {
    BinaryVector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = get(r, c);
    return out;
  }

  // Number of differing cells; shapes must match.
  std::size_t hamming_to(const BinaryMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_)
      throw DimensionError("hamming_to requires equal shapes");
    std::size_t total = 0;
    for (std::size_t w = 0; w < bits_.size(); ++w)
      total += std::popcount(bits_[w] ^ other.bits_[w]);
    return total;
  }

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  BinaryMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows),
        cols_(cols),
        words_per_row_((cols + 63) / 64),
        bits_(rows * words_per_row_, 0) {}

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> bits_;
};

class BinaryMatrix::Builder {
 public:
  Builder(std::size_t rows, std::size_t cols) : matrix_(rows, cols) {}

  std::size_t rows() const noexcept { return matrix_.rows_; }
  std::size_t cols() const noexcept { return matrix_.cols_; }

  void set(std::size_t r, std::size_t c, bool value = true) {
    if (r >= matrix_.rows_ || c >= matrix_.cols_)
      throw DimensionError("builder cell out of range");
    std::uint64_t& word = matrix_.bits_[r * matrix_.words_per_row_ + (c >> 6)];
    const std::uint64_t bit = std::uint64_t{1} << (c & 63);
    if (value)
      word |= bit;
    else
      word &= ~bit;
  }

  BinaryMatrix build() && { return std::move(matrix_); }

 private:
  BinaryMatrix matrix_;
};

inline std::size_t hamming_distance(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b) {
  if (a.size() != b.size())
    throw DimensionError("hamming_distance requires equal lengths");
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    total += (a[i] != 0) != (b[i] != 0);
  return total;
}

inline std::size_t hamming_cells(const BinaryMatrix& a, const BinaryMatrix& b) {
  return a.hamming_to(b);
}

// Text format: one row per line, characters '0'/'1', every row terminated by
// '\n' (including the last). Empty input is the 0x0 matrix.
inline BinaryMatrix parse_matrix(std::string_view text) {
  std::vector<std::uint8_t> cells;
  cells.reserve(text.size());
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line = 1;
  std::size_t width = 0;
  for (char ch : text) {
    if (ch == '0' || ch == '1') {
      cells.push_back(ch == '1');
      ++width;
    } else if (ch == '\n') {
      if (rows == 0) {
        cols = width;
      } else if (width != cols) {
        throw DimensionError("line " + std::to_string(line) + ": expected " +
                             std::to_string(cols) + " cells, got " +
                             std::to_string(width));
      }
      ++rows;
      ++line;
      width = 0;
    } else {
      std::string shown;
      if (ch >= 0x20 && ch < 0x7f) {
        shown = std::string(1, ch);
      } else {
        const char* digits = "0123456789abcdef";
        const unsigned char u = static_cast<unsigned char>(ch);
        shown = {'\\', 'x', digits[u >> 4], digits[u & 15]};
      }
      throw ParseError("unexpected character '" + shown + "'", line);
    }
  }
  if (width != 0) throw ParseError("missing trailing newline", line);
  BinaryMatrix::Builder b(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (cells[r * cols + c]) b.set(r, c);
  return std::move(b).build();
}

inline std::string to_text(const BinaryMatrix& x) {
  std::string out;
  out.reserve(x.rows() * (x.cols() + 1));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c)
      out.push_back(x.get(r, c) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

inline BinaryMatrix read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_matrix(text);
}

inline void write_matrix(const BinaryMatrix& x, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  out << to_text(x);
  if (!out) throw Error("write failed: " + path);
}

}  // namespace bica
