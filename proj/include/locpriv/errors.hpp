#pragma once

#include <stdexcept>
#include <string>

namespace locpriv {

// Training produced a non-finite factor entry. Carries the offending
// factor ("u" or "v") and its index so callers can report it.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(std::string which, std::size_t index)
      : std::runtime_error("divergence: factor " + which + "[" +
                           std::to_string(index) + "] is not finite"),
        factor(std::move(which)),
        index(index) {}

  std::string factor;
  std::size_t index;
};

class empty_data_error : public std::runtime_error {
 public:
  explicit empty_data_error(const std::string& what)
      : std::runtime_error("empty data: " + what) {}
};

// A user pool cannot cover the item space; message lists the missing items.
class coverage_error : public std::runtime_error {
 public:
  explicit coverage_error(const std::string& what)
      : std::runtime_error("coverage: " + what) {}
};

// Unknown source category in the dataset join.
class mapping_error : public std::runtime_error {
 public:
  explicit mapping_error(const std::string& what)
      : std::runtime_error("category mapping: " + what) {}
};

}  // namespace locpriv
