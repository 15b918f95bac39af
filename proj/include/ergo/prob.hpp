#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ergo {

// Admissible broadcast-signal interval. Default is the whole real line
// (no clamping).
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool bounded() const {
        return lo > -std::numeric_limits<double>::infinity() &&
               hi < std::numeric_limits<double>::infinity();
    }
    double clamp(double x) const {
        if (x < lo) return lo;
        if (x > hi) return hi;
        return x;
    }
};

// Signal-dependent probability law p(pi) in [0,1].
//
// logistic:  base + scale / (1 + exp(-rate * (pi - center)))
// constant:  p0
// table:     linear interpolation over sorted (pi, p) breakpoints,
//            constant extrapolation outside their range
//
// `lower_bound` is a declared bound, checked against a grid infimum by
// validate(); certificates use it as the delta of the theorem hypotheses.
// `dini` records the (unverified) continuity assumption; all three kinds
// are Lipschitz, so it defaults to true.
struct ProbabilityFunction {
    enum class Kind { logistic, constant, table };

    Kind kind = Kind::constant;
    double base = 0.0, scale = 0.0, rate = 0.0, center = 0.0; // logistic
    double p0 = 0.0;                                          // constant
    std::vector<std::pair<double, double>> points;            // table
    double lower_bound = 0.0;
    bool dini = true;

    static ProbabilityFunction logistic(double base, double scale, double rate,
                                        double center, double lb = 0.0);
    static ProbabilityFunction constant(double p0);
    static ProbabilityFunction table(std::vector<std::pair<double, double>> pts,
                                     double lb = 0.0);

    double operator()(double pi) const;

    // Infimum over `domain`, by grid sweep plus endpoints when the domain is
    // bounded, else in closed form (the kinds are monotone or piecewise
    // linear, so endpoint limits are attained).
    double infimum(const Interval& domain, double grid_step = 1e-2) const;

    // Throws std::invalid_argument when any structural invariant fails or the
    // declared lower_bound exceeds the infimum over `domain`.
    void validate(const Interval& domain = {}, double grid_step = 1e-2) const;
};

double prob_eval(const ProbabilityFunction& f, double pi);

// Inverse-CDF selection over `weights` in declared order, deterministic in u.
// Weights must be nonnegative and sum to 1 within `tol`.
std::size_t categorical_sample(const std::vector<double>& weights, double u,
                               double tol = 1e-9);
std::size_t categorical_sample(const double* weights, std::size_t n, double u,
                               double tol = 1e-9);

} // namespace ergo
