#pragma once

#include <stdexcept>
#include <string>

namespace vqa {

// Error taxonomy, mapped to CLI exit codes:
//   validation_error -> 1 (bad input data, bad config)
//   io_error         -> 2 (missing/corrupt files)
//   numeric_error    -> 2 (non-finite values, shape mismatches, divergence)
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vqa
