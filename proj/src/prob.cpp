#include "ergo/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ergo {

ProbabilityFunction ProbabilityFunction::logistic(double base, double scale,
                                                  double rate, double center,
                                                  double lb) {
    ProbabilityFunction f;
    f.kind = Kind::logistic;
    f.base = base;
    f.scale = scale;
    f.rate = rate;
    f.center = center;
    f.lower_bound = lb;
    return f;
}

ProbabilityFunction ProbabilityFunction::constant(double p0) {
    ProbabilityFunction f;
    f.kind = Kind::constant;
    f.p0 = p0;
    f.lower_bound = p0;
    return f;
}

ProbabilityFunction ProbabilityFunction::table(
    std::vector<std::pair<double, double>> pts, double lb) {
    ProbabilityFunction f;
    f.kind = Kind::table;
    f.points = std::move(pts);
    f.lower_bound = lb;
    return f;
}

double ProbabilityFunction::operator()(double pi) const {
    switch (kind) {
        case Kind::logistic:
            return base + scale / (1.0 + std::exp(-rate * (pi - center)));
        case Kind::constant:
            return p0;
        case Kind::table: {
            if (pi <= points.front().first) return points.front().second;
            if (pi >= points.back().first) return points.back().second;
            auto it = std::upper_bound(
                points.begin(), points.end(), pi,
                [](double x, const auto& p) { return x < p.first; });
            const auto& [x1, y1] = *it;
            const auto& [x0, y0] = *(it - 1);
            double t = (pi - x0) / (x1 - x0);
            return y0 + t * (y1 - y0);
        }
    }
    return 0.0;
}

double prob_eval(const ProbabilityFunction& f, double pi) { return f(pi); }

double ProbabilityFunction::infimum(const Interval& domain, double grid_step) const {
    if (domain.bounded()) {
        double inf = std::min((*this)(domain.lo), (*this)(domain.hi));
        for (double pi = domain.lo; pi < domain.hi; pi += grid_step)
            inf = std::min(inf, (*this)(pi));
        if (kind == Kind::table) // breakpoints inside the domain are candidate minima
            for (const auto& [x, y] : points)
                if (x >= domain.lo && x <= domain.hi) inf = std::min(inf, y);
        return inf;
    }
    // Unbounded domain: global infimum (a lower bound for the infimum over
    // any subset, so declared bounds are never accepted wrongly).
    switch (kind) {
        case Kind::logistic:
            return std::min(base, base + scale); // limits at -inf / +inf
        case Kind::constant:
            return p0;
        case Kind::table: {
            double inf = points.front().second;
            for (const auto& [x, y] : points) inf = std::min(inf, y);
            return inf;
        }
    }
    return 0.0;
}

void ProbabilityFunction::validate(const Interval& domain, double grid_step) const {
    switch (kind) {
        case Kind::logistic:
            if (!(base >= 0.0 && base <= 1.0))
                throw std::invalid_argument("logistic base must lie in [0,1]");
            if (!(base + scale >= 0.0 && base + scale <= 1.0))
                throw std::invalid_argument("logistic base+scale must lie in [0,1]");
            if (!std::isfinite(rate) || !std::isfinite(center))
                throw std::invalid_argument("logistic rate/center must be finite");
            break;
        case Kind::constant:
            if (!(p0 >= 0.0 && p0 <= 1.0))
                throw std::invalid_argument("constant p0 must lie in [0,1]");
            break;
        case Kind::table: {
            if (points.empty()) throw std::invalid_argument("table needs breakpoints");
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (!(points[i].second >= 0.0 && points[i].second <= 1.0))
                    throw std::invalid_argument("table values must lie in [0,1]");
                if (i > 0 && !(points[i - 1].first < points[i].first))
                    throw std::invalid_argument("table breakpoints must be strictly increasing");
            }
            break;
        }
    }
    if (lower_bound < 0.0)
        throw std::invalid_argument("declared lower bound must be nonnegative");
    double inf = infimum(domain, grid_step);
    if (lower_bound > inf + 1e-12)
        throw std::invalid_argument("declared lower bound " + std::to_string(lower_bound) +
                                    " exceeds infimum " + std::to_string(inf));
}

std::size_t categorical_sample(const double* weights, std::size_t n, double u,
                               double tol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] >= 0.0))
            throw std::invalid_argument("categorical_sample: negative weight");
        sum += weights[i];
    }
    if (!(std::abs(sum - 1.0) <= tol))
        throw std::invalid_argument("categorical_sample: weights sum to " +
                                    std::to_string(sum) + ", expected 1");
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        cum += weights[i];
        if (u < cum) return i;
    }
    return n - 1;
}

std::size_t categorical_sample(const std::vector<double>& weights, double u,
                               double tol) {
    if (weights.empty())
        throw std::invalid_argument("categorical_sample: empty weight vector");
    return categorical_sample(weights.data(), weights.size(), u, tol);
}

} // namespace ergo
