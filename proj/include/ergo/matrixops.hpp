#pragma once

#include <Eigen/Dense>

#include <optional>

namespace ergo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Largest eigenvalue modulus, via the real Schur decomposition.
// Zero-dimensional matrices have radius 0.
double spectral_radius(const Matrix& m);

// Largest singular value.
double induced_two_norm(const Matrix& m);

// Smallest m <= m_max with ||M^m||_2 < 1, if any. The search stops early
// once a power overflows; such a matrix cannot certify contractivity here.
std::optional<int> contraction_index(const Matrix& m, int m_max = 1000);

} // namespace ergo
