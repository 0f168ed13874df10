#pragma once

#include <stdexcept>
#include <string>

namespace fare {

// Invalid user-supplied configuration; maps to CLI exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while executing a valid configuration; maps to CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A fairness constraint needs an (a, y) cell that has zero mass in the
// labeled data. Callers decide how to recover.
struct DegenerateConstraint : std::runtime_error {
    DegenerateConstraint(int group, int label)
        : std::runtime_error("degenerate constraint cell (a=" + std::to_string(group) +
                             ", y=" + std::to_string(label) + "): zero mass in labeled data"),
          group_value(group),
          label_value(label) {}
    int group_value;
    int label_value;
};

}  // namespace fare
