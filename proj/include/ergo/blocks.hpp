#pragma once

#include "ergo/matrixops.hpp"
#include "ergo/rational.hpp"

#include <complex>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ergo {

using ExactMatrix = std::vector<std::vector<Rational>>;

// Discrete-time SISO state-space block x+ = A x + B u, y = C x + D u.
// Blocks built from rational data carry exact coefficient copies alongside
// the double images; those enable the exact pole certificates.
struct LinearBlock {
    Matrix A;
    Vector B;
    RowVector C;
    double D = 0.0;

    bool rational = false;
    ExactMatrix A_exact;
    std::vector<Rational> B_exact, C_exact;
    Rational D_exact;

    int dim() const { return static_cast<int>(A.rows()); }
    void validate() const;

    static LinearBlock from_ss(Matrix A, Vector B, RowVector C, double D);
    static LinearBlock from_ss_exact(ExactMatrix A, std::vector<Rational> B,
                                     std::vector<Rational> C, Rational D);
};

// Nonlinear SISO block: x+ = W(x, u), y = H(x, u). The Lipschitz constant
// (w.r.t. the state) is declared, not derived.
struct NonlinearBlock {
    int dim = 0;
    std::function<Vector(const Vector&, double)> transition;
    std::function<double(const Vector&, double)> output;
    double declared_state_lipschitz = std::numeric_limits<double>::infinity();
};

enum class StabilityClass { schur, marginal, unstable };

enum class PoleCertificate {
    exact_one,            // char. polynomial vanishes at z = 1
    exact_minus_one,      // ... at z = -1
    cyclotomic_quadratic, // divisible by z^2+1, z^2+z+1, or z^2-z+1
    numeric_only
};

struct UnitPole {
    std::complex<double> value;
    PoleCertificate certificate = PoleCertificate::numeric_only;
};

struct StabilityReport {
    StabilityClass classification = StabilityClass::schur;
    double spectral_radius = 0.0;
    std::vector<UnitPole> unit_poles;

    bool is_schur() const { return classification == StabilityClass::schur; }
    bool has_certified_unit_pole() const;
};

// Controllable-canonical realization of
//   H(z) = (b0 + b1 z^-1 + ... ) / (1 + a1 z^-1 + ...).
// The denominator's leading coefficient must be exactly 1. The rational
// overload tags the block and keeps exact coefficients.
LinearBlock tf_to_ss(const std::vector<double>& num, const std::vector<double>& den);
LinearBlock tf_to_ss(const std::vector<Rational>& num, const std::vector<Rational>& den);

std::pair<Vector, double> block_step(const LinearBlock& block, const Vector& state,
                                     double input);

StabilityReport classify_stability(const LinearBlock& block, double tol = 1e-9);

// Characteristic polynomial coefficients (low degree first, monic) of an
// exact square matrix, by the Faddeev-LeVerrier recurrence.
std::vector<Rational> exact_char_poly(const ExactMatrix& a);

bool exact_is_nilpotent(const ExactMatrix& a);

// Closed-loop state matrix for affine agents (A_i, c_i), a linear filter and
// a linear controller fed with e = r - yhat:
//   [ diag(A_i)            0         0   ]
//   [ B_f 1^T diag(c_i^T)  A_f       0   ]
//   [ -B_c D_f 1^T diag(c_i^T)  -B_c C_f  A_c ]
Matrix build_augmented_matrix(const std::vector<Matrix>& agent_A,
                              const std::vector<RowVector>& agent_c,
                              const LinearBlock& filter,
                              const LinearBlock& controller);

std::string to_string(StabilityClass c);
std::string to_string(PoleCertificate c);

} // namespace ergo
