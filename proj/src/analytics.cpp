#include "dtrade/analytics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "dtrade/util.hpp"

namespace dtrade {

double cagr(double v0, double v1, double years) {
    if (!(v0 > 0.0)) throw Error("cagr: initial value must be > 0");
    if (!(years >= 1.0)) throw Error("cagr: need at least one year");
    if (v1 < 0.0) throw Error("cagr: final value must be >= 0");
    return std::pow(v1 / v0, 1.0 / years) - 1.0;
}

namespace {

std::vector<double> sorted_descending(const std::vector<double>& values, double& total) {
    total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0)) throw Error("values must be non-negative");
        total += v;
    }
    if (!(total > 0.0)) throw Error("values are all zero");
    std::vector<double> s = values;
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

}  // namespace

std::vector<LorenzPoint> lorenz(const std::vector<double>& values) {
    double total = 0.0;
    auto s = sorted_descending(values, total);
    std::vector<LorenzPoint> pts{{0.0, 0.0}};
    double cum = 0.0;
    const double n = static_cast<double>(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k];
        pts.push_back({static_cast<double>(k + 1) / n, k + 1 == s.size() ? 1.0 : std::min(cum / total, 1.0)});
    }
    return pts;
}

TopShare top_share(const std::vector<double>& values, double mass) {
    if (!(mass > 0.0 && mass <= 1.0)) throw Error("top_share: mass must be in (0, 1]");
    double total = 0.0;
    auto s = sorted_descending(values, total);
    double cum = 0.0;
    const double need = mass * total * (1.0 - 1e-12);
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k];
        if (cum >= need) return {k + 1, static_cast<double>(k + 1) / static_cast<double>(s.size())};
    }
    return {s.size(), 1.0};
}

double shannon_entropy(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0)) throw Error("entropy: values must be non-negative");
        total += v;
    }
    if (!(total > 0.0)) throw Error("entropy: zero total");
    double e = 0.0;
    for (double v : values) {
        if (v > 0.0) {
            double y = v / total;
            e -= y * std::log(y);
        }
    }
    return std::max(e, 0.0);
}

BasketResult random_basket_entropy(const std::vector<PhysicalTradeEntry>& flows, double target_total, int trials,
                                   std::uint64_t seed, int jobs) {
    if (flows.empty()) throw Error("random basket: no physical trade");
    if (trials < 1) throw Error("random basket: trials must be >= 1");
    if (!(target_total > 0.0)) throw Error("random basket: target must be > 0");
    std::map<std::string, std::map<std::string, double>> by_product;
    double total = 0.0;
    for (const auto& f : flows) {
        by_product[f.hs4][f.origin] += f.value_usd;
        total += f.value_usd;
    }
    if (target_total > total * (1.0 + 1e-12)) throw Error("random basket: target exceeds total physical trade");

    std::vector<std::string> origins;
    for (const auto& [hs4, m] : by_product) {
        for (const auto& [o, v] : m) origins.push_back(o);
    }
    std::sort(origins.begin(), origins.end());
    origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
    std::map<std::string, std::size_t> oi;
    for (std::size_t i = 0; i < origins.size(); ++i) oi[origins[i]] = i;

    struct Product {
        double total = 0.0;
        std::vector<std::pair<std::size_t, double>> exports;
    };
    std::vector<Product> products;
    for (const auto& [hs4, m] : by_product) {
        Product p;
        for (const auto& [o, v] : m) {
            p.exports.emplace_back(oi.at(o), v);
            p.total += v;
        }
        products.push_back(std::move(p));
    }

    std::vector<double> entropy(static_cast<std::size_t>(trials)), taken(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), jobs, [&](std::size_t t) {
        Rng rng(derive_seed(seed, 0xBA5CE7, t));
        std::vector<std::size_t> order(products.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::vector<double> pooled(origins.size(), 0.0);
        double cum = 0.0;
        std::size_t k = 0;
        for (; k < order.size() && cum < target_total; ++k) {
            const auto& p = products[order[k]];
            for (const auto& [o, v] : p.exports) pooled[o] += v;
            cum += p.total;
        }
        entropy[t] = shannon_entropy(pooled);
        taken[t] = static_cast<double>(k);
    });
    return {mean(entropy), mean(taken), trials};
}

Eigen::VectorXd eigenvector_centrality(const Eigen::MatrixXd& F, const CentralityOptions& options) {
    if (F.rows() != F.cols()) throw Error("centrality: flow matrix must be square");
    if ((F.array() < 0.0).any() || !F.allFinite()) throw Error("centrality: flows must be finite and non-negative");
    if (!(options.teleport >= 0.0 && options.teleport < 1.0)) throw Error("centrality: teleport must be in [0, 1)");
    const Eigen::Index n = F.rows();
    Eigen::MatrixXd A = F + F.transpose();
    Eigen::VectorXd colsum = A.colwise().sum().transpose();
    if (n == 0 || !(colsum.sum() > 0.0)) throw Error("centrality: flow matrix is zero");

    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (colsum(j) > 0.0) active.push_back(j);
    }

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (colsum(j) > 0.0) P.col(j) = A.col(j) / colsum(j);
    }

    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    if (options.teleport > 0.0) {
        const double t = options.teleport;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(colsum(j) > 0.0)) P.col(j).setConstant(1.0 / static_cast<double>(n));
        }
        P = (1.0 - t) * P + Eigen::MatrixXd::Constant(n, n, t / static_cast<double>(n));
        pi.setConstant(1.0 / static_cast<double>(n));
    } else {
        // Connectivity among countries with any flow.
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<Eigen::Index> stack{active.front()};
        seen[static_cast<std::size_t>(active.front())] = 1;
        std::size_t reached = 1;
        while (!stack.empty()) {
            Eigen::Index i = stack.back();
            stack.pop_back();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (A(i, j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    ++reached;
                    stack.push_back(j);
                }
            }
        }
        if (reached != active.size()) throw Error("reducible flow graph");
        // Lazy walk: same stationary distribution, no periodicity.
        P = 0.5 * (P + Eigen::MatrixXd::Identity(n, n));
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(colsum(j) > 0.0)) P.col(j).setZero();
        }
        for (Eigen::Index j : active) pi(j) = 1.0 / static_cast<double>(active.size());
    }

    for (int it = 0; it < options.max_iter; ++it) {
        Eigen::VectorXd next = P * pi;
        next /= next.sum();
        double change = (next - pi).lpNorm<1>();
        pi = next;
        if (change < options.tol) return pi;
    }
    throw Error("centrality: power iteration did not converge");
}

std::string to_string(EmissionBasis b) { return b == EmissionBasis::production ? "production" : "consumption"; }

DecouplingRecord decoupling(double gdp0, double gdp1, double em0, double em1) {
    if (!(gdp0 > 0.0) || !(em0 > 0.0)) throw Error("decoupling: base-year GDP and emissions must be > 0");
    DecouplingRecord r;
    r.d_gdp = (gdp1 - gdp0) / gdp0;
    r.d_em = (em1 - em0) / em0;
    if (r.d_gdp == 0.0) throw Error("decoupling index undefined: zero GDP change");
    r.di = (r.d_gdp - r.d_em) / r.d_gdp;
    r.decoupled = r.d_gdp > 0.0 && r.di > 1.0;
    return r;
}

std::vector<DecouplingRecord> classify_decoupling(const Dataset& ds, Year y0, Year y1, EmissionBasis basis) {
    std::vector<DecouplingRecord> out;
    for (const auto& c : ds.countries()) {
        auto a = c.years.find(y0), b = c.years.find(y1);
        if (a == c.years.end() || b == c.years.end()) continue;
        const auto& e0 = basis == EmissionBasis::production ? a->second.emissions_prod : a->second.emissions_cons;
        const auto& e1 = basis == EmissionBasis::production ? b->second.emissions_prod : b->second.emissions_cons;
        if (!e0 || !e1) continue;
        double g0 = a->second.gdp_ppp / a->second.population, g1 = b->second.gdp_ppp / b->second.population;
        double m0 = *e0 / a->second.population, m1 = *e1 / b->second.population;
        if (g0 == g1) {
            spdlog::warn("{}: no GDP per capita change between {} and {}; skipped", c.code, y0, y1);
            continue;
        }
        DecouplingRecord r = decoupling(g0, g1, m0, m1);
        r.country = c.code;
        r.basis = basis;
        out.push_back(r);
    }
    return out;
}

std::vector<GroupTrendRow> group_trends(const std::vector<CountrySeries>& series, bool decoupled_group) {
    std::map<Year, std::pair<std::vector<double>, std::vector<double>>> by_year;
    std::size_t members = 0;
    for (const auto& s : series) {
        if (s.decoupled != decoupled_group) continue;
        ++members;
        for (const auto& [y, v] : s.digital_pc) by_year[y].first.push_back(v);
        for (const auto& [y, v] : s.physical_pc) by_year[y].second.push_back(v);
    }
    if (members == 0) throw Error(std::string("empty group: ") + (decoupled_group ? "decoupled" : "not decoupled"));
    auto se = [](const std::vector<double>& v) {
        return v.size() < 2 ? 0.0 : sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
    };
    std::vector<GroupTrendRow> rows;
    for (const auto& [y, vals] : by_year) {
        GroupTrendRow r;
        r.year = y;
        r.decoupled = decoupled_group;
        r.n = std::max(vals.first.size(), vals.second.size());
        if (!vals.first.empty()) {
            r.digital_mean = mean(vals.first);
            r.digital_se = se(vals.first);
        }
        if (!vals.second.empty()) {
            r.physical_mean = mean(vals.second);
            r.physical_se = se(vals.second);
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<GroupTrendRow> group_trends(const Dataset& ds, const std::vector<FlowRow>& flows, EmissionBasis basis,
                                        bool high_income_only) {
    if (!ds.has_emissions()) throw Error("group trends need emissions data");
    const auto& years = ds.years();
    if (years.size() < 2) throw Error("group trends need at least two years");
    auto records = classify_decoupling(ds, years.front(), years.back(), basis);
    std::vector<CountrySeries> series;
    std::map<Year, std::map<std::string, CountryTrade>> dig, phys;
    for (Year y : years) {
        dig[y] = digital_trade(flows, y);
        phys[y] = physical_trade(ds.physical_trade(), y);
    }
    for (const auto& r : records) {
        const auto& c = ds.country(r.country);
        const auto& last = c.years.at(years.back());
        if (high_income_only && !(last.gdp_ppp / last.population > kHighIncomeGdpPerCapita)) continue;
        CountrySeries s;
        s.country = r.country;
        s.decoupled = r.decoupled;
        for (Year y : years) {
            auto it = c.years.find(y);
            if (it == c.years.end()) continue;
            double pop = it->second.population;
            auto d = dig[y].find(r.country);
            s.digital_pc[y] = (d == dig[y].end() ? 0.0 : d->second.exports) / pop;
            if (ds.has_physical_trade()) {
                auto p = phys[y].find(r.country);
                s.physical_pc[y] = (p == phys[y].end() ? 0.0 : p->second.exports) / pop;
            }
        }
        series.push_back(std::move(s));
    }
    auto rows = group_trends(series, true);
    auto other = group_trends(series, false);
    rows.insert(rows.end(), other.begin(), other.end());
    return rows;
}

RegressionResult ols_robust(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names) {
    const Eigen::Index n = X.rows(), k = X.cols();
    if (y.size() != n) throw Error("ols: y and X have different row counts");
    if (!(n > k)) throw Error("ols: need more observations than regressors");
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != k) throw Error("ols: one name per column");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < k) throw Error("ols: design matrix is rank deficient");
    RegressionResult r;
    r.names = std::move(names);
    r.n = static_cast<std::size_t>(n);
    r.coefficients = qr.solve(y);
    Eigen::VectorXd e = y - X * r.coefficients;
    Eigen::MatrixXd bread = (X.transpose() * X).inverse();
    Eigen::MatrixXd meat = X.transpose() * e.array().square().matrix().asDiagonal() * X;
    Eigen::MatrixXd V = bread * meat * bread * (static_cast<double>(n) / static_cast<double>(n - k));
    r.robust_se = V.diagonal().cwiseMax(0.0).cwiseSqrt();
    double sst = (y.array() - y.mean()).square().sum();
    double ssr = e.squaredNorm();
    r.r2 = sst > 0.0 ? 1.0 - ssr / sst : std::numeric_limits<double>::quiet_NaN();
    r.adj_r2 = 1.0 - (1.0 - r.r2) * static_cast<double>(n - 1) / static_cast<double>(n - k);
    return r;
}

UpperBoundResult reference_upper_bound(const std::map<std::string, double>& own,
                                       const std::map<std::string, double>& reference) {
    std::vector<double> lx, ly;
    for (const auto& [c, v] : own) {
        auto it = reference.find(c);
        if (v > 0.0 && it != reference.end() && it->second > 0.0) {
            lx.push_back(std::log(it->second));
            ly.push_back(std::log(v));
        }
    }
    UpperBoundResult r;
    r.adjusted = own;
    bool any_reference = std::any_of(reference.begin(), reference.end(), [](const auto& kv) { return kv.second > 0.0; });
    if (!any_reference) return r;
    if (lx.size() < 3) throw Error("upper bound: fewer than 3 countries with positive own and reference exports");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(lx.size()), 2);
    Eigen::VectorXd y(static_cast<Eigen::Index>(ly.size()));
    for (std::size_t i = 0; i < lx.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) = 1.0;
        X(static_cast<Eigen::Index>(i), 1) = lx[i];
        y(static_cast<Eigen::Index>(i)) = ly[i];
    }
    auto fit = ols_robust(y, X);
    r.intercept = fit.coefficients(0);
    r.slope = fit.coefficients(1);
    r.n = lx.size();
    for (const auto& [c, ref] : reference) {
        if (!(ref > 0.0)) continue;
        double pred = std::exp(r.intercept + r.slope * std::log(ref));
        auto it = own.find(c);
        double mine = it == own.end() ? 0.0 : it->second;
        r.adjusted[c] = std::max(pred, mine);
    }
    return r;
}

std::map<std::string, CountryTrade> digital_trade(const std::vector<FlowRow>& flows, Year year) {
    std::map<std::string, CountryTrade> out;
    for (const auto& f : flows) {
        if (f.year != year || f.origin == f.dest) continue;
        out[f.origin].exports += f.value_usd;
        out[f.dest].imports += f.value_usd;
    }
    return out;
}

std::map<std::string, CountryTrade> physical_trade(const std::vector<PhysicalTradeEntry>& flows, Year year) {
    std::map<std::string, CountryTrade> out;
    for (const auto& f : flows) {
        if (f.year != year || f.origin == f.dest) continue;
        out[f.origin].exports += f.value_usd;
        out[f.dest].imports += f.value_usd;
    }
    return out;
}

std::map<std::string, double> sector_shares(const std::vector<FlowRow>& flows, Year year) {
    std::map<std::string, double> out;
    double total = 0.0;
    for (const auto& f : flows) {
        if (f.year != year) continue;
        out[f.sector] += f.value_usd;
        total += f.value_usd;
    }
    if (!(total > 0.0)) throw Error("sector shares: no trade in " + std::to_string(year));
    for (auto& [s, v] : out) v /= total;
    return out;
}

Eigen::MatrixXd flow_matrix(const std::vector<FlowRow>& flows, Year year, const std::vector<std::string>& countries) {
    std::map<std::string, Eigen::Index> idx;
    for (std::size_t i = 0; i < countries.size(); ++i) idx[countries[i]] = static_cast<Eigen::Index>(i);
    const auto n = static_cast<Eigen::Index>(countries.size());
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
    for (const auto& f : flows) {
        if (f.year != year) continue;
        auto a = idx.find(f.origin), b = idx.find(f.dest);
        if (a == idx.end() || b == idx.end()) throw Error("flow references unknown country");
        F(a->second, b->second) += f.value_usd;
    }
    return F;
}

}  // namespace dtrade
