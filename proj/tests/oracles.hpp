#pragma once

// Independent reference computations used to check the library.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "dtrade/transport.hpp"
#include "dtrade/util.hpp"

namespace oracle {

/// Maximum of sum W X over the transportation polytope, by enumerating every
/// basis (spanning set of m + n - 1 cells) and keeping the feasible ones.
inline double vertex_enumeration(const Eigen::VectorXd& R, const Eigen::VectorXd& C, const Eigen::MatrixXd& W) {
    const int m = static_cast<int>(R.size()), n = static_cast<int>(C.size());
    const int cells = m * n, k = m + n - 1;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> pick(static_cast<std::size_t>(k));
    // iterate k-subsets of cells in lexicographic order
    for (int i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(m, n);
        std::vector<char> used(static_cast<std::size_t>(k), 0);
        Eigen::VectorXd r = R, c = C;
        bool ok = true;
        for (int step = 0; step < k && ok; ++step) {
            // find a row or column holding exactly one unassigned basic cell
            int chosen = -1;
            for (int line = 0; line < m + n && chosen < 0; ++line) {
                int count = 0, last = -1;
                for (int s = 0; s < k; ++s) {
                    if (used[static_cast<std::size_t>(s)]) continue;
                    int cell = pick[static_cast<std::size_t>(s)];
                    bool on = line < m ? cell / n == line : cell % n == line - m;
                    if (on) ++count, last = s;
                }
                if (count == 1) {
                    int cell = pick[static_cast<std::size_t>(last)];
                    int i = cell / n, j = cell % n;
                    double v = line < m ? r(i) : c(j);
                    X(i, j) = v;
                    r(i) -= v;
                    c(j) -= v;
                    used[static_cast<std::size_t>(last)] = 1;
                    chosen = last;
                }
            }
            if (chosen < 0) ok = false;  // a cycle: not a basis
        }
        const double scale = std::max(1.0, R.sum());
        if (ok && X.minCoeff() >= -1e-9 * scale && r.cwiseAbs().maxCoeff() <= 1e-9 * scale &&
            c.cwiseAbs().maxCoeff() <= 1e-9 * scale) {
            best = std::max(best, (W.array() * X.array()).sum());
        }
        int i = k - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == cells - k + i) --i;
        if (i < 0) break;
        ++pick[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

/// Random balanced instance with integer marginals no larger than 100.
inline dtrade::TransportProblem random_instance(dtrade::Rng& rng) {
    const int m = 1 + static_cast<int>(rng.below(4)), n = 1 + static_cast<int>(rng.below(4));
    const int cap = 100 / std::max(m, n);
    Eigen::MatrixXd X0(m, n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) X0(i, j) = static_cast<double>(rng.below(static_cast<std::uint64_t>(cap) + 1));
    }
    if (X0.sum() == 0.0) X0(0, 0) = 1.0;
    dtrade::TransportProblem p;
    for (int i = 0; i < m; ++i) p.origins.push_back("O" + std::to_string(i));
    for (int j = 0; j < n; ++j) p.dests.push_back("D" + std::to_string(j));
    p.revenue = X0.rowwise().sum();
    p.consumption = X0.colwise().sum().transpose();
    p.weights.resize(m, n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) p.weights(i, j) = 0.01 + rng.uniform();
    }
    p.product = "P";
    return p;
}

/// Normal-approximation interval for a mean with the sample sd, z from the
/// Acklam rational approximation of the inverse normal CDF.
inline double inverse_normal(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    if (p < 0.02425) {
        double q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > 1 - 0.02425) return -inverse_normal(1 - p);
    double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

/// HC1 sandwich for simple regression y = a + b x, written out with scalar sums.
struct SimpleHc1 {
    double intercept, slope, se_intercept, se_slope;
};

inline SimpleHc1 simple_hc1(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
    const double det = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / n;
    // (X'X)^{-1} = [[sxx, -sx], [-sx, n]] / det
    const double i00 = sxx / det, i01 = -sx / det, i11 = n / det;
    double m00 = 0, m01 = 0, m11 = 0;  // X' diag(e^2) X
    for (std::size_t i = 0; i < x.size(); ++i) {
        double e = y[i] - intercept - slope * x[i];
        m00 += e * e;
        m01 += e * e * x[i];
        m11 += e * e * x[i] * x[i];
    }
    // V = A M A with A symmetric 2x2
    const double v00 = i00 * (i00 * m00 + i01 * m01) + i01 * (i00 * m01 + i01 * m11);
    const double v11 = i01 * (i01 * m00 + i11 * m01) + i11 * (i01 * m01 + i11 * m11);
    const double k = n / (n - 2.0);
    return {intercept, slope, std::sqrt(k * v00), std::sqrt(k * v11)};
}

}  // namespace oracle
