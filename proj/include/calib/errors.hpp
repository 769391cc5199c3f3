#pragma once

#include <stdexcept>
#include <string>

namespace calib {

// Invalid run configuration or CLI usage (exit code 1).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data: CSV, IDX, checkpoint (exit code 2).
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure such as NaN parameters mid-training (exit code 3).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace calib
