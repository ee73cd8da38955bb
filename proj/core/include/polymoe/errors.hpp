#pragma once

#include <stdexcept>

namespace polymoe {

// Invalid or unreadable input data (bad CSV, response outside the family
// support, malformed model files).
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite intermediate values, failed solves and other numerical
// breakdowns.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace polymoe
