#include "dtrade/transport.hpp"

#include <boost/math/distributions/normal.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "dtrade/csv.hpp"
#include "dtrade/util.hpp"

namespace dtrade {

Eigen::MatrixXd cost_weights(const Dataset& ds, const std::vector<std::string>& origins,
                             const std::vector<std::string>& dests, double floor_km) {
    if (!(floor_km > 0.0)) throw Error("domestic distance floor must be > 0");
    Eigen::MatrixXd W(static_cast<Eigen::Index>(origins.size()), static_cast<Eigen::Index>(dests.size()));
    for (std::size_t o = 0; o < origins.size(); ++o) {
        for (std::size_t d = 0; d < dests.size(); ++d) {
            double km = floor_km;
            if (origins[o] != dests[d]) {
                const DyadRecord* dy = ds.find_dyad(origins[o], dests[d]);
                if (!dy) throw Error("missing dyad for ordered pair " + origins[o] + "->" + dests[d]);
                if (!(dy->dist_km > 0.0)) throw Error("non-positive distance for " + origins[o] + "->" + dests[d]);
                km = std::max(dy->dist_km, floor_km);
            }
            W(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(d)) = 1.0 / km;
        }
    }
    return W;
}

TransportProblem balance(TransportProblem p) {
    if ((p.revenue.array() < 0.0).any() || (p.consumption.array() < 0.0).any()) {
        throw Error("product " + p.product + ": negative revenue or consumption");
    }
    double sr = p.revenue.sum();
    double sc = p.consumption.sum();
    if (sr > 0.0 && sc == 0.0) throw Error("product " + p.product + ": revenue but no consumption to allocate to");
    if (sc == 0.0) {
        p.balance_factor = 1.0;
        return p;
    }
    p.balance_factor = sr / sc;
    if (p.balance_factor != 1.0) p.consumption *= p.balance_factor;
    return p;
}

namespace {

void check_shape(const TransportProblem& p) {
    const auto m = static_cast<Eigen::Index>(p.origins.size());
    const auto n = static_cast<Eigen::Index>(p.dests.size());
    if (p.revenue.size() != m || p.consumption.size() != n || p.weights.rows() != m || p.weights.cols() != n) {
        throw Error("product " + p.product + ": inconsistent problem dimensions");
    }
    if (!p.weights.allFinite() || (m * n > 0 && !(p.weights.minCoeff() > 0.0))) {
        throw Error("product " + p.product + ": weights must be finite and > 0");
    }
    double sr = p.revenue.sum(), sc = p.consumption.sum();
    if (std::abs(sr - sc) > 1e-9 * std::max({sr, sc, 1e-300})) {
        throw Error("product " + p.product + ": problem is not balanced");
    }
}

Allocation empty_allocation(const TransportProblem& p) {
    Allocation a;
    a.product = p.product;
    a.origins = p.origins;
    a.dests = p.dests;
    a.X = Eigen::MatrixXd::Zero(p.revenue.size(), p.consumption.size());
    return a;
}

// Transportation simplex on a spanning-tree basis of exactly m + n - 1 cells.
class TransportSimplex {
public:
    TransportSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply, const Eigen::VectorXd& demand)
        : c_(cost), a_(supply), b_(demand), m_(static_cast<int>(supply.size())), n_(static_cast<int>(demand.size())),
          x_(Eigen::MatrixXd::Zero(m_, n_)), basic_(static_cast<std::size_t>(m_ * n_), 0) {}

    int run() {
        northwest_corner();
        const double cmax = std::max(c_.cwiseAbs().maxCoeff(), 1e-300);
        const double tol = 1e-12 * cmax;
        const long cap = 50L * m_ * n_ + 1000;
        int degenerate_streak = 0;
        long it = 0;
        for (;; ++it) {
            if (it > cap) throw Error("transport solver exceeded its iteration limit");
            potentials();
            int ei = -1, ej = -1;
            double best = -tol;
            const bool bland = degenerate_streak > 2 * (m_ + n_);
            for (int i = 0; i < m_ && !(bland && ei >= 0); ++i) {
                for (int j = 0; j < n_; ++j) {
                    if (basic_[cell(i, j)]) continue;
                    double d = c_(i, j) - u_[static_cast<std::size_t>(i)] - v_[static_cast<std::size_t>(j)];
                    if (d < best) {
                        best = bland ? -tol : d;
                        ei = i;
                        ej = j;
                        if (bland) break;
                    }
                }
            }
            if (ei < 0) break;
            double theta = pivot(ei, ej);
            degenerate_streak = theta > 0.0 ? 0 : degenerate_streak + 1;
        }
        recompute_values();
        return static_cast<int>(it);
    }

    const Eigen::MatrixXd& solution() const { return x_; }

private:
    std::size_t cell(int i, int j) const { return static_cast<std::size_t>(i * n_ + j); }

    void northwest_corner() {
        std::vector<double> ra(a_.data(), a_.data() + m_), rb(b_.data(), b_.data() + n_);
        int i = 0, j = 0;
        for (;;) {
            double q = std::min(ra[static_cast<std::size_t>(i)], rb[static_cast<std::size_t>(j)]);
            x_(i, j) = q;
            basic_[cell(i, j)] = 1;
            ra[static_cast<std::size_t>(i)] -= q;
            rb[static_cast<std::size_t>(j)] -= q;
            if (i == m_ - 1 && j == n_ - 1) break;
            if (i == m_ - 1) ++j;
            else if (j == n_ - 1) ++i;
            else if (ra[static_cast<std::size_t>(i)] <= rb[static_cast<std::size_t>(j)]) ++i;
            else ++j;
        }
    }

    // Rows are nodes [0, m), columns [m, m + n).
    void build_tree() {
        adj_.assign(static_cast<std::size_t>(m_ + n_), {});
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; j < n_; ++j) {
                if (!basic_[cell(i, j)]) continue;
                adj_[static_cast<std::size_t>(i)].push_back(m_ + j);
                adj_[static_cast<std::size_t>(m_ + j)].push_back(i);
            }
        }
    }

    void potentials() {
        build_tree();
        u_.assign(static_cast<std::size_t>(m_), std::numeric_limits<double>::quiet_NaN());
        v_.assign(static_cast<std::size_t>(n_), std::numeric_limits<double>::quiet_NaN());
        u_[0] = 0.0;
        std::vector<int> stack{0};
        std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
        seen[0] = 1;
        int reached = 1;
        while (!stack.empty()) {
            int node = stack.back();
            stack.pop_back();
            for (int other : adj_[static_cast<std::size_t>(node)]) {
                if (seen[static_cast<std::size_t>(other)]) continue;
                seen[static_cast<std::size_t>(other)] = 1;
                ++reached;
                if (node < m_) {
                    int j = other - m_;
                    v_[static_cast<std::size_t>(j)] = c_(node, j) - u_[static_cast<std::size_t>(node)];
                } else {
                    int j = node - m_;
                    u_[static_cast<std::size_t>(other)] = c_(other, j) - v_[static_cast<std::size_t>(j)];
                }
                stack.push_back(other);
            }
        }
        if (reached != m_ + n_) throw std::logic_error("transport basis is not a spanning tree");
    }

    // Adds cell (ei, ej) to the basis, pushes theta around the cycle and drops
    // the leaving cell. Returns theta.
    double pivot(int ei, int ej) {
        // Path in the tree from column node ej to row node ei.
        const int start = m_ + ej, goal = ei;
        std::vector<int> parent(static_cast<std::size_t>(m_ + n_), -1);
        std::vector<int> stack{start};
        parent[static_cast<std::size_t>(start)] = start;
        while (!stack.empty()) {
            int node = stack.back();
            stack.pop_back();
            if (node == goal) break;
            for (int other : adj_[static_cast<std::size_t>(node)]) {
                if (parent[static_cast<std::size_t>(other)] >= 0) continue;
                parent[static_cast<std::size_t>(other)] = node;
                stack.push_back(other);
            }
        }
        // Walk back from the row to the column; the cell touching the column is '-'.
        std::vector<std::pair<int, int>> path;  // cells in order from ei towards ej
        for (int node = goal; node != start; node = parent[static_cast<std::size_t>(node)]) {
            int prev = parent[static_cast<std::size_t>(node)];
            int r = node < m_ ? node : prev;
            int col = (node < m_ ? prev : node) - m_;
            path.emplace_back(r, col);
        }
        // path.front() touches row ei: sign '-'; signs alternate, path.back() touches column ej: '-'.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = 0;
        std::size_t leave_index = std::numeric_limits<std::size_t>::max();
        for (std::size_t k = 0; k < path.size(); k += 2) {
            auto [r, col] = path[k];
            double val = x_(r, col);
            std::size_t idx = cell(r, col);
            if (val < theta || (val == theta && idx < leave_index)) {
                theta = val;
                leave = k;
                leave_index = idx;
            }
        }
        theta = std::max(theta, 0.0);
        x_(ei, ej) = theta;
        for (std::size_t k = 0; k < path.size(); ++k) {
            auto [r, col] = path[k];
            x_(r, col) += (k % 2 == 0) ? -theta : theta;
        }
        auto [lr, lc] = path[leave];
        x_(lr, lc) = 0.0;
        basic_[cell(lr, lc)] = 0;
        basic_[cell(ei, ej)] = 1;
        return theta;
    }

    // Solves the basic values exactly from the marginals by peeling leaves.
    void recompute_values() {
        build_tree();
        std::vector<double> rest(static_cast<std::size_t>(m_ + n_));
        for (int i = 0; i < m_; ++i) rest[static_cast<std::size_t>(i)] = a_(i);
        for (int j = 0; j < n_; ++j) rest[static_cast<std::size_t>(m_ + j)] = b_(j);
        std::vector<int> degree(static_cast<std::size_t>(m_ + n_));
        for (int k = 0; k < m_ + n_; ++k) degree[static_cast<std::size_t>(k)] = static_cast<int>(adj_[static_cast<std::size_t>(k)].size());
        std::vector<char> used(static_cast<std::size_t>(m_ * n_), 0);
        x_.setZero();
        std::vector<int> leaves;
        for (int k = m_ + n_ - 1; k >= 0; --k) {
            if (degree[static_cast<std::size_t>(k)] == 1) leaves.push_back(k);
        }
        while (!leaves.empty()) {
            int node = leaves.back();
            leaves.pop_back();
            if (degree[static_cast<std::size_t>(node)] != 1) continue;
            int other = -1;
            for (int o : adj_[static_cast<std::size_t>(node)]) {
                int r = node < m_ ? node : o, col = (node < m_ ? o : node) - m_;
                if (!used[cell(r, col)]) {
                    other = o;
                    break;
                }
            }
            int r = node < m_ ? node : other, col = (node < m_ ? other : node) - m_;
            double value = std::max(rest[static_cast<std::size_t>(node)], 0.0);
            x_(r, col) = value;
            used[cell(r, col)] = 1;
            rest[static_cast<std::size_t>(node)] = 0.0;
            rest[static_cast<std::size_t>(other)] -= value;
            --degree[static_cast<std::size_t>(node)];
            if (--degree[static_cast<std::size_t>(other)] == 1) leaves.push_back(other);
        }
    }

    const Eigen::MatrixXd& c_;
    const Eigen::VectorXd& a_;
    const Eigen::VectorXd& b_;
    int m_, n_;
    Eigen::MatrixXd x_;
    std::vector<char> basic_;
    std::vector<std::vector<int>> adj_;
    std::vector<double> u_, v_;
};

}  // namespace

Allocation solve_transport(const TransportProblem& p) {
    check_shape(p);
    Allocation a = empty_allocation(p);
    if (a.X.size() == 0 || p.revenue.sum() == 0.0) return a;
    Eigen::MatrixXd cost = -p.weights;
    TransportSimplex simplex(cost, p.revenue, p.consumption);
    a.iterations = simplex.run();
    a.X = simplex.solution();
    a.objective = (p.weights.array() * a.X.array()).sum();
    return a;
}

Allocation greedy_allocate(const TransportProblem& p) {
    check_shape(p);
    Allocation a = empty_allocation(p);
    const Eigen::Index m = p.revenue.size(), n = p.consumption.size();
    if (a.X.size() == 0) return a;
    std::vector<Eigen::Index> dest_order(static_cast<std::size_t>(n));
    std::iota(dest_order.begin(), dest_order.end(), 0);
    std::stable_sort(dest_order.begin(), dest_order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return p.consumption(x) > p.consumption(y); });
    Eigen::VectorXd cap = p.revenue;
    for (Eigen::Index d : dest_order) {
        std::vector<Eigen::Index> origin_order(static_cast<std::size_t>(m));
        std::iota(origin_order.begin(), origin_order.end(), 0);
        std::stable_sort(origin_order.begin(), origin_order.end(),
                         [&](Eigen::Index x, Eigen::Index y) { return p.weights(x, d) > p.weights(y, d); });
        double need = p.consumption(d);
        for (Eigen::Index o : origin_order) {
            if (need <= 0.0) break;
            double q = std::min(need, cap(o));
            if (q <= 0.0) continue;
            a.X(o, d) += q;
            cap(o) -= q;
            need -= q;
        }
    }
    a.objective = (p.weights.array() * a.X.array()).sum();
    return a;
}

RevenueLedger reassign_to_parent(const Dataset& ds) {
    std::map<std::tuple<std::string, std::string, Year>, double> moved;  // (parent firm, brand, year)
    std::vector<RevenueEntry> out;
    for (const auto& e : ds.revenue().entries()) {
        const BrandRecord& b = ds.brand(e.brand_id);
        const FirmRecord& parent = ds.firm(b.parent_firm_id);
        if (!parent.is_parent()) throw Error("brand " + b.brand_id + " does not resolve to a parent firm");
        moved[{parent.firm_id, e.brand_id, e.year}] += e.revenue_usd;
    }
    for (const auto& [key, total] : moved) {
        out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), total});
    }
    return RevenueLedger(std::move(out));
}

std::vector<TransportProblem> build_problems(const Dataset& ds, const RevenueLedger& ledger,
                                             const ConsumptionMatrix& consumption, Year year, double floor_km) {
    std::map<std::string, std::vector<std::pair<std::string, double>>> demand;
    for (const auto& e : consumption.entries()) {
        if (e.year == year && e.consumption_usd > 0.0) demand[e.brand_id].emplace_back(e.country, e.consumption_usd);
    }
    std::vector<TransportProblem> problems;
    for (const auto& b : ds.brands()) {
        auto origins = ds.revenue_by_origin(ledger, b.brand_id, year);
        TransportProblem p;
        p.product = b.brand_id;
        std::vector<double> r;
        for (const auto& [country, value] : origins) {
            if (value > 0.0) {
                p.origins.push_back(country);
                r.push_back(value);
            }
        }
        if (p.origins.empty()) continue;
        std::vector<double> c;
        auto it = demand.find(b.brand_id);
        if (it != demand.end()) {
            auto rows = it->second;
            std::sort(rows.begin(), rows.end());
            for (const auto& [country, value] : rows) {
                p.dests.push_back(country);
                c.push_back(value);
            }
        }
        p.revenue = Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
        p.consumption = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
        p.weights = cost_weights(ds, p.origins, p.dests, floor_km);
        problems.push_back(balance(std::move(p)));
    }
    return problems;
}

std::vector<Allocation> allocate(const std::vector<TransportProblem>& problems, Solver solver, int jobs) {
    std::vector<Allocation> out(problems.size());
    parallel_for(problems.size(), jobs, [&](std::size_t i) {
        out[i] = solver == Solver::lp ? solve_transport(problems[i]) : greedy_allocate(problems[i]);
    });
    return out;
}

std::vector<FlowRow> extract_flows(const std::vector<Allocation>& allocations, const Dataset& ds, Year year) {
    std::vector<FlowRow> rows;
    for (const auto& a : allocations) {
        const std::string& sector = ds.brand(a.product).sector;
        for (std::size_t o = 0; o < a.origins.size(); ++o) {
            for (std::size_t d = 0; d < a.dests.size(); ++d) {
                if (a.origins[o] == a.dests[d]) continue;
                double v = a.X(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(d));
                if (v <= 0.0) continue;
                rows.push_back({year, a.product, sector, a.origins[o], a.dests[d], v, v, v});
            }
        }
    }
    return rows;
}

ShareInterval share_interval(const std::vector<double>& shares, double level) {
    if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must be in (0, 1)");
    ShareInterval s;
    s.n = shares.size();
    if (shares.empty()) {
        s.degenerate = true;
        return s;
    }
    s.mean = mean(shares);
    if (std::all_of(shares.begin(), shares.end(), [&](double v) { return v == shares.front(); })) {
        s.mean = s.lower = s.upper = shares.front();
        s.degenerate = shares.size() < 2;
        return s;
    }
    if (shares.size() < 2) {
        s.lower = s.upper = s.mean;
        s.degenerate = true;
        return s;
    }
    boost::math::normal_distribution<double> normal;
    double z = boost::math::quantile(normal, 0.5 + level / 2.0);
    double half = z * sample_sd(shares) / std::sqrt(static_cast<double>(shares.size()));
    s.lower = s.mean - half;
    s.upper = s.mean + half;
    return s;
}

BoundsResult confidence_bounds(const std::vector<Allocation>& allocations, const Dataset& ds, Year year,
                               const BoundsOptions& options) {
    struct Pair {
        std::size_t alloc;
        std::size_t origin;
        double revenue;
        double domestic;
    };
    std::vector<Pair> pairs;
    for (std::size_t k = 0; k < allocations.size(); ++k) {
        const auto& a = allocations[k];
        for (std::size_t o = 0; o < a.origins.size(); ++o) {
            double r = a.X.row(static_cast<Eigen::Index>(o)).sum();
            if (r <= 0.0) continue;
            double dom = 0.0;
            auto it = std::find(a.dests.begin(), a.dests.end(), a.origins[o]);
            if (it != a.dests.end()) {
                dom = a.X(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(it - a.dests.begin()));
            }
            pairs.push_back({k, o, r, dom});
        }
    }

    auto group_of = [&](const Pair& p) {
        return options.per_origin ? allocations[p.alloc].origins[p.origin] : std::string("*");
    };
    std::map<std::string, std::vector<double>> shares;
    for (const auto& p : pairs) shares[group_of(p)].push_back(p.domestic / p.revenue);

    BoundsResult result;
    std::map<std::string, ShareInterval> intervals;
    for (const auto& [g, s] : shares) {
        ShareInterval ci = share_interval(s, options.level);
        if (ci.degenerate) {
            spdlog::warn("year {}: fewer than 2 domestic-share observations in group '{}'; bounds equal the point estimate",
                         year, g);
        }
        intervals[g] = ci;
        result.intervals.emplace_back(g, ci);
    }

    for (const auto& p : pairs) {
        const auto& a = allocations[p.alloc];
        const ShareInterval& ci = intervals.at(group_of(p));
        const double exports = p.revenue - p.domestic;
        if (exports <= 0.0) continue;
        double upper = exports, lower = exports;
        if (!ci.degenerate) {
            upper = std::clamp((1.0 - ci.lower) * p.revenue, 0.0, p.revenue);
            lower = std::clamp((1.0 - ci.upper) * p.revenue, 0.0, p.revenue);
        }
        // The pooled interval need not cover every pair's own share.
        upper = std::max(upper, exports);
        lower = std::min(lower, exports);
        const std::string& sector = ds.brand(a.product).sector;
        for (std::size_t d = 0; d < a.dests.size(); ++d) {
            if (a.dests[d] == a.origins[p.origin]) continue;
            double v = a.X(static_cast<Eigen::Index>(p.origin), static_cast<Eigen::Index>(d));
            if (v <= 0.0) continue;
            double share = v / exports;
            result.flows.push_back({year, a.product, sector, a.origins[p.origin], a.dests[d], v,
                                    std::min(lower * share, v), std::max(upper * share, v)});
        }
    }
    std::sort(result.flows.begin(), result.flows.end(), [](const FlowRow& x, const FlowRow& y) {
        return std::tie(x.year, x.brand_id, x.origin, x.dest) < std::tie(y.year, y.brand_id, y.origin, y.dest);
    });
    return result;
}

void write_allocations(const std::vector<Allocation>& allocations, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    csv::Writer w(f);
    w.row({"product", "origin", "dest", "value_usd"});
    for (const auto& a : allocations) {
        for (std::size_t o = 0; o < a.origins.size(); ++o) {
            for (std::size_t d = 0; d < a.dests.size(); ++d) {
                double v = a.X(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(d));
                if (v > 0.0) w.row({a.product, a.origins[o], a.dests[d], format_number(v)});
            }
        }
    }
}

std::vector<Allocation> read_allocations(const std::string& path) {
    csv::Table t = csv::read_file(path);
    t.require({"product", "origin", "dest", "value_usd"});
    std::map<std::string, std::map<std::pair<std::string, std::string>, double>> cells;
    for (std::size_t r = 0; r < t.size(); ++r) {
        cells[t.at(r, "product")][{t.at(r, "origin"), t.at(r, "dest")}] += t.non_negative(r, "value_usd");
    }
    std::vector<Allocation> out;
    for (const auto& [product, m] : cells) {
        Allocation a;
        a.product = product;
        std::map<std::string, Eigen::Index> oi, di;
        for (const auto& [key, v] : m) {
            oi.emplace(key.first, 0);
            di.emplace(key.second, 0);
        }
        for (auto& [name, idx] : oi) {
            idx = static_cast<Eigen::Index>(a.origins.size());
            a.origins.push_back(name);
        }
        for (auto& [name, idx] : di) {
            idx = static_cast<Eigen::Index>(a.dests.size());
            a.dests.push_back(name);
        }
        a.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.origins.size()), static_cast<Eigen::Index>(a.dests.size()));
        for (const auto& [key, v] : m) a.X(oi.at(key.first), di.at(key.second)) = v;
        out.push_back(std::move(a));
    }
    return out;
}

void write_flows(const std::vector<FlowRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    csv::Writer w(f);
    w.row({"year", "brand_id", "sector", "origin", "dest", "value_usd", "lower_usd", "upper_usd"});
    for (const auto& r : rows) {
        w.row({std::to_string(r.year), r.brand_id, r.sector, r.origin, r.dest, format_number(r.value_usd),
               format_number(r.lower_usd), format_number(r.upper_usd)});
    }
}

std::vector<FlowRow> read_flows(const std::string& path) {
    csv::Table t = csv::read_file(path);
    t.require({"year", "brand_id", "sector", "origin", "dest", "value_usd", "lower_usd", "upper_usd"});
    std::vector<FlowRow> rows;
    for (std::size_t r = 0; r < t.size(); ++r) {
        rows.push_back({t.integer(r, "year"), t.at(r, "brand_id"), t.at(r, "sector"), t.at(r, "origin"),
                        t.at(r, "dest"), t.non_negative(r, "value_usd"), t.non_negative(r, "lower_usd"),
                        t.non_negative(r, "upper_usd")});
    }
    return rows;
}

}  // namespace dtrade
