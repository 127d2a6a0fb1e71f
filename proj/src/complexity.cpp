#include "dtrade/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "dtrade/csv.hpp"
#include "dtrade/util.hpp"

namespace dtrade {

namespace {

LabelledMatrix drop_empty(const std::vector<std::string>& countries, const std::vector<std::string>& activities,
                          const Eigen::MatrixXd& X) {
    LabelledMatrix out;
    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (X.row(i).sum() > 0.0) rows.push_back(i);
        else out.dropped.push_back("country:" + countries[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (X.col(j).sum() > 0.0) cols.push_back(j);
        else out.dropped.push_back("activity:" + activities[static_cast<std::size_t>(j)]);
    }
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
        out.countries.push_back(countries[static_cast<std::size_t>(rows[a])]);
        for (std::size_t b = 0; b < cols.size(); ++b) {
            out.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = X(rows[a], cols[b]);
        }
    }
    for (Eigen::Index j : cols) out.activities.push_back(activities[static_cast<std::size_t>(j)]);
    return out;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

LabelledMatrix rca(const OutputMatrix& X) {
    if (X.values.rows() != static_cast<Eigen::Index>(X.countries.size()) ||
        X.values.cols() != static_cast<Eigen::Index>(X.activities.size())) {
        throw Error("output matrix labels do not match its shape");
    }
    if ((X.values.array() < 0.0).any()) throw Error("output matrix has negative entries");
    if (!(X.values.sum() > 0.0)) throw Error("output matrix total is zero");
    LabelledMatrix R = drop_empty(X.countries, X.activities, X.values);
    Eigen::VectorXd xc = R.values.rowwise().sum();
    Eigen::RowVectorXd xp = R.values.colwise().sum();
    double total = xc.sum();
    for (Eigen::Index i = 0; i < R.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < R.values.cols(); ++j) {
            R.values(i, j) = (R.values(i, j) / xc(i)) / (xp(j) / total);
        }
    }
    return R;
}

LabelledMatrix binarize(const LabelledMatrix& R) {
    Eigen::MatrixXd M = (R.values.array() >= 1.0).cast<double>();
    LabelledMatrix out = drop_empty(R.countries, R.activities, M);
    out.dropped.insert(out.dropped.begin(), R.dropped.begin(), R.dropped.end());
    if (out.values.size() == 0) throw Error("specialization matrix is empty after filtering");
    return out;
}

Eigen::MatrixXd mtilde(const Eigen::MatrixXd& M) {
    Eigen::VectorXd mc = M.rowwise().sum();
    Eigen::VectorXd mp = M.colwise().sum().transpose();
    if (mc.size() == 0 || mc.minCoeff() <= 0.0 || mp.minCoeff() <= 0.0) {
        throw Error("specialization matrix has an empty row or column");
    }
    Eigen::MatrixXd Mp = M * mp.cwiseInverse().asDiagonal();
    return mc.cwiseInverse().asDiagonal() * (Mp * M.transpose());
}

Eigen::VectorXd zscore(const Eigen::VectorXd& v) {
    if (v.size() < 2) throw Error("zscore: need at least two values");
    std::vector<double> x(v.data(), v.data() + v.size());
    double sd = sample_sd(x);
    if (!(sd > 0.0)) throw Error("zscore: constant vector");
    return (v.array() - mean(x)) / sd;
}

Eigen::VectorXd minmax(const Eigen::VectorXd& v) {
    if (v.size() == 0) throw Error("minmax: empty vector");
    double lo = v.minCoeff(), hi = v.maxCoeff();
    if (!(hi > lo)) throw Error("minmax: constant vector");
    return (v.array() - lo) / (hi - lo);
}

ComplexityScores eci_pci(const LabelledMatrix& L) {
    const Eigen::MatrixXd& M = L.values;
    const Eigen::Index nc = M.rows();
    if (nc < 3) throw Error("complexity needs at least 3 countries, found " + std::to_string(nc));
    if (((M.array() != 0.0) && (M.array() != 1.0)).any()) throw Error("specialization matrix must be binary");
    Eigen::VectorXd mc = M.rowwise().sum();
    Eigen::VectorXd mp = M.colwise().sum().transpose();
    if (mc.minCoeff() <= 0.0 || mp.minCoeff() <= 0.0) throw Error("specialization matrix has an empty row or column");

    // Connectivity of the bipartite graph (countries 0..nc-1, activities after).
    const Eigen::Index np = M.cols();
    std::vector<char> seen(static_cast<std::size_t>(nc + np), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    Eigen::Index reached = 1;
    while (!stack.empty()) {
        Eigen::Index node = stack.back();
        stack.pop_back();
        if (node < nc) {
            for (Eigen::Index p = 0; p < np; ++p) {
                if (M(node, p) > 0.0 && !seen[static_cast<std::size_t>(nc + p)]) {
                    seen[static_cast<std::size_t>(nc + p)] = 1;
                    ++reached;
                    stack.push_back(nc + p);
                }
            }
        } else {
            for (Eigen::Index c = 0; c < nc; ++c) {
                if (M(c, node - nc) > 0.0 && !seen[static_cast<std::size_t>(c)]) {
                    seen[static_cast<std::size_t>(c)] = 1;
                    ++reached;
                    stack.push_back(c);
                }
            }
        }
    }
    const bool connected = reached == nc + np;

    // Symmetric similar matrix S = Dc^-1/2 M Dp^-1 M^T Dc^-1/2.
    Eigen::VectorXd dc_isqrt = mc.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd B = dc_isqrt.asDiagonal() * M * mp.cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::MatrixXd S = B * B.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
    if (solver.info() != Eigen::Success) throw Error("eigen decomposition failed");
    const Eigen::VectorXd& lambda = solver.eigenvalues();  // ascending
    const double l1 = lambda(nc - 1), l2 = lambda(nc - 2), l3 = lambda(nc - 3);
    const double gap_tol = 1e-10 * std::max(l1, 1.0);
    if (!connected || l1 - l2 <= gap_tol || l2 - l3 <= gap_tol) {
        throw Error(connected ? "degenerate spectrum: second eigenvalue is not simple"
                              : "degenerate spectrum: specialization matrix is disconnected");
    }

    ComplexityScores out;
    out.countries = L.countries;
    out.activities = L.activities;
    out.lambda2 = l2;
    Eigen::VectorXd v = dc_isqrt.asDiagonal() * solver.eigenvectors().col(nc - 2);
    Eigen::VectorXd eci = zscore(v);
    std::vector<double> a(eci.data(), eci.data() + nc), d(mc.data(), mc.data() + nc);
    double r = pearson(a, d);
    if (std::isnan(r) || r == 0.0) {
        // Next cue: complex countries make less ubiquitous products.
        Eigen::VectorXd ubiq = mc.cwiseInverse().asDiagonal() * (M * mp);
        std::vector<double> u(ubiq.data(), ubiq.data() + nc);
        r = -pearson(a, u);
    }
    if (std::isnan(r) || r == 0.0) {
        Eigen::Index k = 0;
        eci.cwiseAbs().maxCoeff(&k);
        if (eci(k) < 0.0) eci = -eci;
    } else if (r < 0.0) {
        eci = -eci;
    }

    // Alternating averages from diversity, z-scored at every half step.
    Eigen::MatrixXd avg_c = mc.cwiseInverse().asDiagonal() * M;
    Eigen::MatrixXd avg_p = mp.cwiseInverse().asDiagonal() * M.transpose();
    const double ratio = l2 > 0.0 ? std::max(l3, 0.0) / l2 : 0.0;
    const int cap = static_cast<int>(std::min(2e5, ratio > 0.0 ? 60.0 / -std::log(ratio) + 200.0 : 200.0));
    // Equal diversity is orthogonal to every non-trivial eigenvector, so start from a ramp instead.
    Eigen::VectorXd k = mc.maxCoeff() > mc.minCoeff() ? zscore(mc) : zscore(Eigen::VectorXd::LinSpaced(nc, 0.0, 1.0));
    int it = 0;
    for (; it < cap; ++it) {
        Eigen::VectorXd kp = avg_p * k;
        double spread = kp.maxCoeff() - kp.minCoeff();
        if (spread > 0.0) kp = zscore(kp);
        Eigen::VectorXd next = zscore(avg_c * kp);
        double change = std::min(max_abs(next - k), max_abs(next + k));
        k = next;
        if (change < 1e-14) break;
    }
    out.map_iterations = it + 1;
    out.map_gap = std::min(max_abs(k - eci), max_abs(k + eci));
    if (out.map_gap > 1e-8) {
        throw Error("eigenvector and iterated-map ECI disagree by " + std::to_string(out.map_gap));
    }
    out.eci = eci;
    out.eci_minmax = minmax(eci);
    out.pci = zscore(avg_p * eci);
    return out;
}

bool is_digital_activity(const std::string& activity) { return activity.rfind("digital:", 0) == 0; }

namespace {

OutputMatrix from_map(const std::map<std::string, std::map<std::string, double>>& cells) {
    OutputMatrix X;
    std::set<std::string> acts;
    for (const auto& [c, row] : cells) {
        X.countries.push_back(c);
        for (const auto& [p, v] : row) acts.insert(p);
    }
    X.activities.assign(acts.begin(), acts.end());
    std::map<std::string, Eigen::Index> ai;
    for (std::size_t j = 0; j < X.activities.size(); ++j) ai[X.activities[j]] = static_cast<Eigen::Index>(j);
    X.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(X.countries.size()), static_cast<Eigen::Index>(acts.size()));
    Eigen::Index i = 0;
    for (const auto& [c, row] : cells) {
        for (const auto& [p, v] : row) X.values(i, ai.at(p)) = v;
        ++i;
    }
    return X;
}

}  // namespace

OutputMatrix physical_output(const std::vector<PhysicalTradeEntry>& trade, Year year) {
    std::map<std::string, std::map<std::string, double>> cells;
    for (const auto& t : trade) {
        if (t.year == year && t.origin != t.dest) cells[t.origin]["hs4:" + t.hs4] += t.value_usd;
    }
    return from_map(cells);
}

OutputMatrix digital_output(const std::vector<FlowRow>& flows, Year year) {
    std::map<std::string, std::map<std::string, double>> cells;
    for (const auto& f : flows) {
        if (f.year == year && f.origin != f.dest) cells[f.origin]["digital:" + f.sector] += f.value_usd;
    }
    return from_map(cells);
}

OutputMatrix merge_digital(const OutputMatrix& physical, const OutputMatrix& digital) {
    std::map<std::string, std::map<std::string, double>> cells;
    auto add = [&](const OutputMatrix& X) {
        if (X.values.rows() != static_cast<Eigen::Index>(X.countries.size()) ||
            X.values.cols() != static_cast<Eigen::Index>(X.activities.size())) {
            throw Error("output matrix labels do not match its shape");
        }
        for (std::size_t i = 0; i < X.countries.size(); ++i) {
            auto& row = cells[X.countries[i]];
            for (std::size_t j = 0; j < X.activities.size(); ++j) {
                if (row.count(X.activities[j]) && &X == &digital) {
                    throw Error("activity label collision: " + X.activities[j]);
                }
                row[X.activities[j]] += X.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
    };
    add(physical);
    add(digital);
    return from_map(cells);
}

void write_output_triplets(const OutputMatrix& X, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    csv::Writer w(f);
    w.row({"country", "activity", "value_usd"});
    for (std::size_t i = 0; i < X.countries.size(); ++i) {
        for (std::size_t j = 0; j < X.activities.size(); ++j) {
            double v = X.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (v > 0.0) w.row({X.countries[i], X.activities[j], format_number(v)});
        }
    }
}

}  // namespace dtrade
