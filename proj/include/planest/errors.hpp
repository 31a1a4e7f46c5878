#pragma once

#include <stdexcept>
#include <string>

namespace planest {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text. line/col are 1-based; 0 means "not tied to a position".
struct parse_error : error {
  int line = 0;
  int col = 0;
  parse_error(const std::string& msg, int line_ = 0, int col_ = 0)
      : error(line_ > 0 ? msg + " (line " + std::to_string(line_) + ", col " +
                              std::to_string(col_) + ")"
                        : msg),
        line(line_),
        col(col_) {}
};

// Problems with datasets, catalogs, workloads, dictionaries.
struct data_error : error {
  using error::error;
};

// Problems inside the numeric kernel or a trained model (NaN loss, shape
// mismatch, corrupt checkpoint).
struct model_error : error {
  using error::error;
};

}  // namespace planest
