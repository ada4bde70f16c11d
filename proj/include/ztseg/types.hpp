#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ztseg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<int>;

// Thrown by local training when the loss stops being finite. fedavg_round
// catches this and drops the offending client update.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown by the spectral solver when residuals stay above tolerance after
// the iteration budget. Carries the per-pair residual norms.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, std::vector<double> res)
        : std::runtime_error(msg), residuals(std::move(res)) {}
    std::vector<double> residuals;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace ztseg
