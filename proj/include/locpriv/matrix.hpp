#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace locpriv {

// Dense row-major matrix of doubles. Factor matrices are stored one vector
// per row (user factors: m x d, item factors: n x d) so a single factor is
// contiguous.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t at(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

// One observed rating. Ratings are binary preferences: 1 = may release
// location data for that item, 0 = wants to hide it.
struct Rating {
  std::size_t user;
  std::size_t item;
  double value;

  friend bool operator==(const Rating&, const Rating&) = default;
};

struct ItemRating {
  std::size_t item;
  double rating;

  friend bool operator==(const ItemRating&, const ItemRating&) = default;
};

struct UserRating {
  std::size_t user;
  double rating;

  friend bool operator==(const UserRating&, const UserRating&) = default;
};

// Sparse m x n matrix of observed binary ratings, indexed both by user and
// by item. The set of observed cells is also the visit-indicator set:
// y_ij = 1 exactly when (i, j) is present.
class PreferenceMatrix {
 public:
  PreferenceMatrix(std::size_t n_users, std::size_t n_items,
                   std::vector<Rating> entries)
      : n_users_(n_users), n_items_(n_items) {
    std::sort(entries.begin(), entries.end(),
              [](const Rating& a, const Rating& b) {
                return a.user != b.user ? a.user < b.user : a.item < b.item;
              });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const Rating& e = entries[k];
      if (e.user >= n_users || e.item >= n_items) {
        throw std::invalid_argument(
            "rating index out of range: (" + std::to_string(e.user) + ", " +
            std::to_string(e.item) + ")");
      }
      if (e.value != 0.0 && e.value != 1.0) {
        throw std::invalid_argument("rating must be 0 or 1, got " +
                                    std::to_string(e.value));
      }
      if (k > 0 && entries[k - 1].user == e.user &&
          entries[k - 1].item == e.item) {
        throw std::invalid_argument(
            "duplicate rating for (" + std::to_string(e.user) + ", " +
            std::to_string(e.item) + ")");
      }
    }

    user_offsets_.assign(n_users_ + 1, 0);
    by_user_.reserve(entries.size());
    for (const Rating& e : entries) user_offsets_[e.user + 1]++;
    for (std::size_t i = 0; i < n_users_; ++i)
      user_offsets_[i + 1] += user_offsets_[i];
    for (const Rating& e : entries) by_user_.push_back({e.item, e.value});

    std::vector<Rating> by_item = entries;
    std::sort(by_item.begin(), by_item.end(),
              [](const Rating& a, const Rating& b) {
                return a.item != b.item ? a.item < b.item : a.user < b.user;
              });
    item_offsets_.assign(n_items_ + 1, 0);
    by_item_.reserve(by_item.size());
    for (const Rating& e : by_item) item_offsets_[e.item + 1]++;
    for (std::size_t j = 0; j < n_items_; ++j)
      item_offsets_[j + 1] += item_offsets_[j];
    for (const Rating& e : by_item) by_item_.push_back({e.user, e.value});

    entries_ = std::move(entries);
  }

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t n_observed() const { return entries_.size(); }  // M

  // Observed ratings of one user, ascending item index.
  std::span<const ItemRating> user_ratings(std::size_t i) const {
    check_user(i);
    return {by_user_.data() + user_offsets_[i],
            user_offsets_[i + 1] - user_offsets_[i]};
  }

  // Observed ratings of one item, ascending user index.
  std::span<const UserRating> item_ratings(std::size_t j) const {
    check_item(j);
    return {by_item_.data() + item_offsets_[j],
            item_offsets_[j + 1] - item_offsets_[j]};
  }

  // All entries, sorted by (user, item).
  const std::vector<Rating>& entries() const { return entries_; }

  void check_user(std::size_t i) const {
    if (i >= n_users_)
      throw std::invalid_argument("user index " + std::to_string(i) +
                                  " out of range");
  }
  void check_item(std::size_t j) const {
    if (j >= n_items_)
      throw std::invalid_argument("item index " + std::to_string(j) +
                                  " out of range");
  }

 private:
  std::size_t n_users_;
  std::size_t n_items_;
  std::vector<Rating> entries_;
  std::vector<ItemRating> by_user_;
  std::vector<std::size_t> user_offsets_;
  std::vector<UserRating> by_item_;
  std::vector<std::size_t> item_offsets_;
};

}  // namespace locpriv
