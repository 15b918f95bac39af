#include "ergo/matrixops.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace ergo {

double spectral_radius(const Matrix& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("spectral_radius: matrix must be square");
    if (m.rows() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("spectral_radius: eigenvalue iteration failed");
    return solver.eigenvalues().array().abs().maxCoeff();
}

double induced_two_norm(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    return m.jacobiSvd().singularValues()(0);
}

std::optional<int> contraction_index(const Matrix& m, int m_max) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("contraction_index: matrix must be square");
    if (m_max < 1) throw std::invalid_argument("contraction_index: m_max must be >= 1");
    if (m.rows() == 0) return 1;
    Matrix power = m;
    for (int k = 1; k <= m_max; ++k) {
        // an overflowed power feeds garbage to the SVD; no certificate there
        if (!power.allFinite()) return std::nullopt;
        const double norm = induced_two_norm(power);
        if (!std::isfinite(norm)) return std::nullopt;
        if (norm < 1.0) return k;
        if (norm > 1e150) return std::nullopt; // further products only overflow
        if (k < m_max) power = power * m;
    }
    return std::nullopt;
}

} // namespace ergo
