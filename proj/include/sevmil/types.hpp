#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace sevmil {

using Index = Eigen::Index;

// Probabilities, logits, gradients and weight matrices are double precision.
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;

// Instance features are single precision, row-major so a bag maps directly
// onto its on-disk layout (one instance per row).
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using CountMatrix =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace sevmil
