#include "ergo/blocks.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace ergo {

namespace {

Matrix exact_to_double(const ExactMatrix& a) {
    Matrix m(a.size(), a.empty() ? 0 : a.front().size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].to_double();
    return m;
}

ExactMatrix exact_mul(const ExactMatrix& a, const ExactMatrix& b) {
    std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b.front().size();
    ExactMatrix c(n, std::vector<Rational>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            if (a[i][l].is_zero()) continue;
            for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
        }
    return c;
}

bool exact_is_zero(const ExactMatrix& a) {
    for (const auto& row : a)
        for (const auto& x : row)
            if (!x.is_zero()) return false;
    return true;
}

// Evaluate a monic polynomial (coefficients low degree first) at z.
Rational poly_eval(const std::vector<Rational>& coeffs, const Rational& z) {
    Rational acc = 0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
    return acc;
}

// Remainder of coeffs (low first) modulo z^2 + b z + c; true iff it is zero.
bool divisible_by_quadratic(const std::vector<Rational>& coeffs, const Rational& b,
                            const Rational& c) {
    if (coeffs.size() < 3) return false;
    std::vector<Rational> r = coeffs;
    for (std::size_t d = r.size() - 1; d >= 2; --d) {
        Rational q = r[d];
        if (q.is_zero()) continue;
        r[d] = 0;
        r[d - 1] -= q * b;
        r[d - 2] -= q * c;
    }
    return r[0].is_zero() && r[1].is_zero();
}

} // namespace

void LinearBlock::validate() const {
    int n = dim();
    if (A.cols() != n || B.size() != n || C.size() != n)
        throw std::invalid_argument("LinearBlock: inconsistent dimensions");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !std::isfinite(D))
        throw std::invalid_argument("LinearBlock: entries must be finite");
    if (rational) {
        auto match = [](double x, const Rational& q) {
            return std::abs(x - q.to_double()) <= 1e-12;
        };
        if (static_cast<int>(A_exact.size()) != n ||
            static_cast<int>(B_exact.size()) != n ||
            static_cast<int>(C_exact.size()) != n)
            throw std::invalid_argument("LinearBlock: exact copies have wrong shape");
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(A_exact[i].size()) != n)
                throw std::invalid_argument("LinearBlock: exact copies have wrong shape");
            for (int j = 0; j < n; ++j)
                if (!match(A(i, j), A_exact[i][j]))
                    throw std::invalid_argument("LinearBlock: exact A drifts from float image");
            if (!match(B(i), B_exact[i]) || !match(C(i), C_exact[i]))
                throw std::invalid_argument("LinearBlock: exact B/C drifts from float image");
        }
        if (!match(D, D_exact))
            throw std::invalid_argument("LinearBlock: exact D drifts from float image");
    }
}

LinearBlock LinearBlock::from_ss(Matrix A, Vector B, RowVector C, double D) {
    LinearBlock b;
    b.A = std::move(A);
    b.B = std::move(B);
    b.C = std::move(C);
    b.D = D;
    b.validate();
    return b;
}

LinearBlock LinearBlock::from_ss_exact(ExactMatrix A, std::vector<Rational> B,
                                       std::vector<Rational> C, Rational D) {
    LinearBlock b;
    b.A = exact_to_double(A);
    b.B = Vector(B.size());
    b.C = RowVector(C.size());
    for (std::size_t i = 0; i < B.size(); ++i) b.B(static_cast<Eigen::Index>(i)) = B[i].to_double();
    for (std::size_t i = 0; i < C.size(); ++i) b.C(static_cast<Eigen::Index>(i)) = C[i].to_double();
    b.D = D.to_double();
    b.rational = true;
    b.A_exact = std::move(A);
    b.B_exact = std::move(B);
    b.C_exact = std::move(C);
    b.D_exact = std::move(D);
    b.validate();
    return b;
}

LinearBlock tf_to_ss(const std::vector<Rational>& num, const std::vector<Rational>& den) {
    if (den.empty() || den.front().is_zero())
        throw std::invalid_argument("tf_to_ss: improper transfer function (leading denominator coefficient is zero)");
    if (den.front() != Rational(1))
        throw std::invalid_argument("tf_to_ss: denominator leading coefficient must be 1");
    if (num.empty()) throw std::invalid_argument("tf_to_ss: empty numerator");

    std::size_t n = std::max(num.size(), den.size()) - 1;
    std::vector<Rational> b(n + 1), a(n + 1);
    for (std::size_t i = 0; i < num.size(); ++i) b[i] = num[i];
    for (std::size_t i = 0; i < den.size(); ++i) a[i] = den[i];

    ExactMatrix A(n, std::vector<Rational>(n));
    std::vector<Rational> B(n), C(n);
    for (std::size_t j = 0; j < n; ++j) A[0][j] = -a[j + 1];
    for (std::size_t i = 1; i < n; ++i) A[i][i - 1] = 1;
    if (n > 0) B[0] = 1;
    for (std::size_t j = 0; j < n; ++j) C[j] = b[j + 1] - a[j + 1] * b[0];
    return LinearBlock::from_ss_exact(std::move(A), std::move(B), std::move(C), b[0]);
}

LinearBlock tf_to_ss(const std::vector<double>& num, const std::vector<double>& den) {
    if (den.empty() || den.front() == 0.0)
        throw std::invalid_argument("tf_to_ss: improper transfer function (leading denominator coefficient is zero)");
    if (std::abs(den.front() - 1.0) > 1e-12)
        throw std::invalid_argument("tf_to_ss: denominator leading coefficient must be 1");
    if (num.empty()) throw std::invalid_argument("tf_to_ss: empty numerator");

    std::size_t n = std::max(num.size(), den.size()) - 1;
    std::vector<double> b(n + 1, 0.0), a(n + 1, 0.0);
    for (std::size_t i = 0; i < num.size(); ++i) b[i] = num[i];
    for (std::size_t i = 0; i < den.size(); ++i) a[i] = den[i];

    Matrix A = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Vector B = Vector::Zero(static_cast<Eigen::Index>(n));
    RowVector C = RowVector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) A(0, static_cast<Eigen::Index>(j)) = -a[j + 1];
    for (std::size_t i = 1; i < n; ++i) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    if (n > 0) B(0) = 1.0;
    for (std::size_t j = 0; j < n; ++j) C(static_cast<Eigen::Index>(j)) = b[j + 1] - a[j + 1] * b[0];
    return LinearBlock::from_ss(std::move(A), std::move(B), std::move(C), b[0]);
}

std::pair<Vector, double> block_step(const LinearBlock& block, const Vector& state,
                                     double input) {
    if (state.size() != block.dim())
        throw std::invalid_argument("block_step: state dimension mismatch");
    double output = block.C.dot(state) + block.D * input;
    Vector next = block.A * state + block.B * input;
    return {std::move(next), output};
}

std::vector<Rational> exact_char_poly(const ExactMatrix& a) {
    std::size_t n = a.size();
    for (const auto& row : a)
        if (row.size() != n) throw std::invalid_argument("exact_char_poly: matrix must be square");
    std::vector<Rational> c(n + 1);
    c[n] = 1;
    if (n == 0) return c;

    ExactMatrix id(n, std::vector<Rational>(n));
    for (std::size_t i = 0; i < n; ++i) id[i][i] = 1;

    ExactMatrix m = id;
    ExactMatrix am = a;
    for (std::size_t k = 1; k <= n; ++k) {
        if (k > 1) {
            m = am;
            for (std::size_t i = 0; i < n; ++i) m[i][i] += c[n - k + 1];
            am = exact_mul(a, m);
        }
        Rational tr = 0;
        for (std::size_t i = 0; i < n; ++i) tr += am[i][i];
        c[n - k] = -(tr / Rational(static_cast<long long>(k)));
    }
    return c;
}

bool exact_is_nilpotent(const ExactMatrix& a) {
    std::size_t n = a.size();
    if (n == 0) return true;
    ExactMatrix p = a;
    for (std::size_t k = 1; k <= n; ++k) {
        if (exact_is_zero(p)) return true;
        if (k < n) p = exact_mul(p, a);
    }
    return exact_is_zero(p);
}

bool StabilityReport::has_certified_unit_pole() const {
    for (const auto& p : unit_poles)
        if (p.certificate != PoleCertificate::numeric_only) return true;
    return false;
}

StabilityReport classify_stability(const LinearBlock& block, double tol) {
    StabilityReport report;
    int n = block.dim();
    if (n == 0) {
        report.classification = StabilityClass::schur;
        report.spectral_radius = 0.0;
        return report;
    }
    Eigen::EigenSolver<Matrix> solver(block.A, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("classify_stability: eigenvalue iteration failed");
    auto eigenvalues = solver.eigenvalues();
    report.spectral_radius = eigenvalues.array().abs().maxCoeff();

    std::vector<Rational> charpoly;
    if (block.rational) charpoly = exact_char_poly(block.A_exact);

    bool any_outside = false;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        std::complex<double> lambda = eigenvalues(i);
        double mod = std::abs(lambda);
        if (mod > 1.0 + tol) any_outside = true;
        if (std::abs(mod - 1.0) >= tol) continue;

        UnitPole pole;
        pole.value = lambda;
        if (block.rational) {
            double angle = std::abs(std::arg(lambda));
            const double pi = 3.14159265358979323846;
            auto near = [&](double target) { return std::abs(angle - target) < 1e-6; };
            if (near(0.0) && poly_eval(charpoly, 1).is_zero())
                pole.certificate = PoleCertificate::exact_one;
            else if (near(pi) && poly_eval(charpoly, -1).is_zero())
                pole.certificate = PoleCertificate::exact_minus_one;
            else if (near(pi / 2) && divisible_by_quadratic(charpoly, 0, 1))
                pole.certificate = PoleCertificate::cyclotomic_quadratic;
            else if (near(2 * pi / 3) && divisible_by_quadratic(charpoly, 1, 1))
                pole.certificate = PoleCertificate::cyclotomic_quadratic;
            else if (near(pi / 3) && divisible_by_quadratic(charpoly, -1, 1))
                pole.certificate = PoleCertificate::cyclotomic_quadratic;
        }
        report.unit_poles.push_back(pole);
    }

    if (report.spectral_radius < 1.0 - tol)
        report.classification = StabilityClass::schur;
    else if (any_outside)
        report.classification = StabilityClass::unstable;
    else
        report.classification = StabilityClass::marginal;
    return report;
}

Matrix build_augmented_matrix(const std::vector<Matrix>& agent_A,
                              const std::vector<RowVector>& agent_c,
                              const LinearBlock& filter,
                              const LinearBlock& controller) {
    if (agent_A.size() != agent_c.size())
        throw std::invalid_argument("build_augmented_matrix: agent matrix/output lists differ in length");
    Eigen::Index ns = 0;
    for (std::size_t i = 0; i < agent_A.size(); ++i) {
        if (agent_A[i].rows() != agent_A[i].cols() || agent_c[i].size() != agent_A[i].rows())
            throw std::invalid_argument("build_augmented_matrix: inconsistent agent dimensions");
        ns += agent_A[i].rows();
    }
    Eigen::Index nf = filter.dim(), nc = controller.dim();
    Eigen::Index n = ns + nf + nc;

    // 1^T diag(c_i^T) stacks the per-agent output rows side by side.
    RowVector csum = RowVector::Zero(ns);
    {
        Eigen::Index off = 0;
        for (const auto& c : agent_c) {
            csum.segment(off, c.size()) = c;
            off += c.size();
        }
    }

    Matrix aug = Matrix::Zero(n, n);
    Eigen::Index off = 0;
    for (const auto& a : agent_A) {
        aug.block(off, off, a.rows(), a.cols()) = a;
        off += a.rows();
    }
    aug.block(ns, 0, nf, ns) = filter.B * csum;
    aug.block(ns, ns, nf, nf) = filter.A;
    aug.block(ns + nf, 0, nc, ns) = -controller.B * (filter.D * csum);
    aug.block(ns + nf, ns, nc, nf) = -controller.B * filter.C;
    aug.block(ns + nf, ns + nf, nc, nc) = controller.A;
    return aug;
}

std::string to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::schur: return "schur";
        case StabilityClass::marginal: return "marginal";
        case StabilityClass::unstable: return "unstable";
    }
    return "?";
}

std::string to_string(PoleCertificate c) {
    switch (c) {
        case PoleCertificate::exact_one: return "exact_one";
        case PoleCertificate::exact_minus_one: return "exact_minus_one";
        case PoleCertificate::cyclotomic_quadratic: return "cyclotomic_quadratic";
        case PoleCertificate::numeric_only: return "numeric_only";
    }
    return "?";
}

} // namespace ergo
