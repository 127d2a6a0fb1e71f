#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "dtrade/data_model.hpp"

namespace dtrade {

/// One product's transport instance. Rows are origins, columns destinations.
struct TransportProblem {
    std::string product;
    std::vector<std::string> origins;
    std::vector<std::string> dests;
    Eigen::VectorXd revenue;      // R_o
    Eigen::VectorXd consumption;  // C_d
    Eigen::MatrixXd weights;      // W_od
    double balance_factor = 1.0;  // applied to consumption
};

struct Allocation {
    std::string product;
    std::vector<std::string> origins;
    std::vector<std::string> dests;
    Eigen::MatrixXd X;
    double objective = 0.0;  // sum W_od X_od
    int iterations = 0;
};

/// W_od = 1 / max(D_od, floor); domestic pairs get 1 / floor.
Eigen::MatrixXd cost_weights(const Dataset& dataset, const std::vector<std::string>& origins,
                             const std::vector<std::string>& dests, double domestic_floor_km = 1.0);

/// Scales consumption by sum(R) / sum(C). Throws when revenue has nowhere to go.
TransportProblem balance(TransportProblem problem);

/// Exact maximizer of sum W X under both marginals (transportation simplex).
Allocation solve_transport(const TransportProblem& problem);

/// Nearest-origin heuristic: destinations by descending consumption, each
/// filled from the origins with the largest weight first.
Allocation greedy_allocate(const TransportProblem& problem);

/// Moves every brand's revenue to its parent firm and drops the subsidiary entries.
RevenueLedger reassign_to_parent(const Dataset& dataset);

/// One problem per brand with revenue in `year`, balanced and ready to solve.
std::vector<TransportProblem> build_problems(const Dataset& dataset, const RevenueLedger& ledger,
                                             const ConsumptionMatrix& consumption, Year year,
                                             double domestic_floor_km = 1.0);

enum class Solver { lp, greedy };

/// Solves every problem, in parallel when jobs > 1; result order follows input order.
std::vector<Allocation> allocate(const std::vector<TransportProblem>& problems, Solver solver = Solver::lp,
                                 int jobs = 1);

struct FlowRow {
    Year year = 0;
    std::string brand_id;
    std::string sector;
    std::string origin;
    std::string dest;
    double value_usd = 0.0;
    double lower_usd = 0.0;
    double upper_usd = 0.0;
};

/// Cross-border cells only; bounds equal the point value.
std::vector<FlowRow> extract_flows(const std::vector<Allocation>& allocations, const Dataset& dataset, Year year);

struct ShareInterval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t n = 0;
    bool degenerate = false;  // fewer than two shares
};

/// Normal-approximation interval for the mean of `shares`.
ShareInterval share_interval(const std::vector<double>& shares, double level = 0.95);

struct BoundsOptions {
    double level = 0.95;
    /// One interval per origin country instead of one pooled interval.
    bool per_origin = false;
};

struct BoundsResult {
    std::vector<FlowRow> flows;
    std::vector<std::pair<std::string, ShareInterval>> intervals;  // group ("*" when pooled), interval
};

/// Domestic share of each (origin, product) is X_oo / R_o. Export bounds per
/// (origin, product) come from the interval and are split over destinations
/// in proportion to the point flows.
BoundsResult confidence_bounds(const std::vector<Allocation>& allocations, const Dataset& dataset, Year year,
                               const BoundsOptions& options = {});

void write_allocations(const std::vector<Allocation>& allocations, const std::string& path);
std::vector<Allocation> read_allocations(const std::string& path);

void write_flows(const std::vector<FlowRow>& rows, const std::string& path);
std::vector<FlowRow> read_flows(const std::string& path);

}  // namespace dtrade
