#pragma once

#include <stdexcept>
#include <string>

namespace dismax {

// Error taxonomy shared by every module. The CLI maps these onto exit codes:
// usage/config/shape -> 1, data/format -> 2, numeric -> 3.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct shape_error : error {
  using error::error;
};

struct config_error : error {
  using error::error;
};

struct data_error : error {
  using error::error;
};

struct format_error : error {
  using error::error;
};

struct numeric_error : error {
  using error::error;
};

}  // namespace dismax
