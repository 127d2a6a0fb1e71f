#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dtrade/data_model.hpp"
#include "dtrade/transport.hpp"

namespace dtrade {

/// (v1 / v0)^(1 / years) - 1
double cagr(double v0, double v1, double years);

inline double trade_balance(double exports, double imports) { return exports - imports; }
inline double combined_balance(double physical_net, double digital_net) { return physical_net + digital_net; }

struct LorenzPoint {
    double x = 0.0;  // fraction of countries
    double y = 0.0;  // cumulative share of the total
};

/// Cumulative shares with values sorted in descending order, from (0,0) to (1,1).
std::vector<LorenzPoint> lorenz(const std::vector<double>& values);

struct TopShare {
    std::size_t count = 0;
    double fraction = 0.0;
};
/// Smallest k whose top-k values hold at least `mass` of the total.
TopShare top_share(const std::vector<double>& values, double mass = 0.8);

/// Natural-log entropy of the shares of `values`.
double shannon_entropy(const std::vector<double>& values);

struct BasketResult {
    double mean_entropy = 0.0;
    double mean_products = 0.0;
    int trials = 0;
};

/// Each trial draws HS4 products without replacement until their trade reaches
/// `target_total`, then takes the entropy of the pooled exports by origin.
BasketResult random_basket_entropy(const std::vector<PhysicalTradeEntry>& flows, double target_total,
                                   int trials = 1000, std::uint64_t seed = 1, int jobs = 1);

struct CentralityOptions {
    /// Uniform jump probability; 0 turns the fallback off.
    double teleport = 0.0;
    double tol = 1e-12;
    int max_iter = 100000;
};

/// Stationary distribution of the random walk on combined flows F + F^T
/// (column-stochastic). Zero-flow countries score 0 without teleportation.
Eigen::VectorXd eigenvector_centrality(const Eigen::MatrixXd& flows, const CentralityOptions& options = {});

enum class EmissionBasis { production, consumption };
std::string to_string(EmissionBasis b);

struct DecouplingRecord {
    std::string country;
    double d_gdp = 0.0;  // fractional change
    double d_em = 0.0;
    double di = 0.0;
    bool decoupled = false;
    EmissionBasis basis = EmissionBasis::production;
};

/// DI = (dGDP - dEm) / dGDP; decoupled iff dGDP > 0 and DI > 1.
DecouplingRecord decoupling(double gdp0, double gdp1, double em0, double em1);

/// Per-capita GDP and emissions between two years for every country with emissions.
std::vector<DecouplingRecord> classify_decoupling(const Dataset& dataset, Year y0, Year y1, EmissionBasis basis);

inline constexpr double kHighIncomeGdpPerCapita = 13205.0;

struct CountrySeries {
    std::string country;
    bool decoupled = false;
    std::map<Year, double> digital_pc;
    std::map<Year, double> physical_pc;
};

struct GroupTrendRow {
    Year year = 0;
    bool decoupled = false;
    std::size_t n = 0;
    double digital_mean = 0.0;
    double digital_se = 0.0;
    double physical_mean = 0.0;
    double physical_se = 0.0;
};

/// Unweighted yearly means (and standard errors) of one group. Throws on an empty group.
std::vector<GroupTrendRow> group_trends(const std::vector<CountrySeries>& series, bool decoupled_group);

/// Builds the per-country series from flows and physical trade, classifies
/// countries over the first and last year, and returns both groups.
std::vector<GroupTrendRow> group_trends(const Dataset& dataset, const std::vector<FlowRow>& flows,
                                        EmissionBasis basis, bool high_income_only);

struct RegressionResult {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd robust_se;  // HC1
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t n = 0;
};

/// OLS with HC1 standard errors. X must already contain the intercept column.
RegressionResult ols_robust(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names = {});

struct UpperBoundResult {
    std::map<std::string, double> adjusted;
    double intercept = 0.0;
    double slope = 0.0;
    std::size_t n = 0;
};

/// Fits log(own) on log(reference) over countries positive on both sides and
/// returns max(exp(prediction), own). Countries without a positive reference keep their own value.
UpperBoundResult reference_upper_bound(const std::map<std::string, double>& own,
                                       const std::map<std::string, double>& reference);

/// Exports and imports of each country in one year.
struct CountryTrade {
    double exports = 0.0;
    double imports = 0.0;
};
std::map<std::string, CountryTrade> digital_trade(const std::vector<FlowRow>& flows, Year year);
std::map<std::string, CountryTrade> physical_trade(const std::vector<PhysicalTradeEntry>& flows, Year year);

/// Share of each sector in a year's digital exports; sums to 1.
std::map<std::string, double> sector_shares(const std::vector<FlowRow>& flows, Year year);

/// Country-by-country flow matrix in `countries` order.
Eigen::MatrixXd flow_matrix(const std::vector<FlowRow>& flows, Year year, const std::vector<std::string>& countries);

}  // namespace dtrade
