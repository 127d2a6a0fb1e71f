#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include "dtrade/data_model.hpp"
#include "dtrade/features.hpp"

namespace dtrade {

struct HyperParams {
    int max_splits = 5;
    int min_parent_size = 10;
    double learn_rate = 0.1;
    int n_cycles = 150;
};

struct HyperGrid {
    std::vector<int> max_splits = {1, 3, 5, 10, 15, 20, 30, 50};
    std::vector<int> min_parent_size = {3, 5, 7, 10};
};

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    int samples = 0;
    bool is_leaf() const { return feature < 0; }
};

/// Least-squares CART tree. Rows with x <= threshold go left.
class RegressionTree {
public:
    std::vector<TreeNode> nodes;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    int split_count() const;
    int depth() const;
};

/// Column orderings reused by every tree of one ensemble fit.
struct PresortedColumns {
    std::vector<std::vector<int>> order;
    static PresortedColumns build(const Eigen::MatrixXd& X);
};

/// Greedy best-first tree on squared error: the leaf with the largest gain is
/// split next until `max_splits` splits are made or no leaf holding at least
/// `min_parent` samples can be split. Split search is exhaustive over unique
/// values. Equal gains go to the first feature counting from index `rotate`
/// (mod feature count), then to the lowest threshold. The ensemble passes the
/// tree index as `rotate`.
RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& target, int max_splits, int min_parent);
RegressionTree fit_tree(const Eigen::MatrixXd& X, const PresortedColumns& sorted, const Eigen::VectorXd& target,
                        int max_splits, int min_parent, int rotate = 0);

/// prediction = base + learn_rate * sum(tree outputs)
struct BoostedEnsemble {
    HyperParams params;
    double base = 0.0;
    std::vector<RegressionTree> trees;
    /// Training MSE before the first tree and after each cycle.
    std::vector<double> training_mse;

    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// Stagewise least-squares boosting. Throws if training MSE ever increases.
BoostedEnsemble fit_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& params);

struct Metrics {
    double r2 = 0.0;
    double restricted_r2 = 0.0;  // NaN when fewer than 2 nonzero pairs or zero variance
    double accuracy = 0.0;
    double f1 = 0.0;
};

/// r2 compares log1p(y) with log1p(yhat); restricted_r2 uses only pairs with
/// y >= zero_threshold. A value is "nonzero" iff it is >= zero_threshold.
Metrics metrics(const Eigen::VectorXd& y_usd, const Eigen::VectorXd& yhat_usd, double zero_threshold = 1000.0);

/// exp(yhat_log) - 1, clamped at 0, with values below the threshold set to 0.
double to_usd(double yhat_log, double zero_threshold = 1000.0);

// ---------------------------------------------------------------------------
// Data cleaning

struct CleaningOptions {
    double min_revenue_usd = 1e7;
    double min_peer_correlation = 0.3;
};

struct CleaningResult {
    std::vector<std::string> kept;
    std::vector<std::pair<std::string, std::string>> removed;  // brand, reason
};

/// Drops brands below the revenue floor, then brands whose mean Pearson
/// correlation with co-national peers (same parent country) is below the floor.
/// Brands without a peer, or whose correlations are all undefined, are kept.
CleaningResult clean_training_set(const Dataset& dataset, Year year, const CleaningOptions& options = {});

// ---------------------------------------------------------------------------
// Full model: zero stage + feature subset + ensemble

struct ModelSpec {
    HyperParams params;
    std::vector<std::string> features;  // subset of the 22; empty = all
    double zero_threshold = 1000.0;
};

struct FittedModel {
    ZeroStage zero;
    std::vector<std::string> features;
    BoostedEnsemble ensemble;
    double zero_threshold = 1000.0;

    /// Design used by the regressor: selected columns plus zero_prob.
    Eigen::MatrixXd design(const FeatureMatrix& raw22) const;
    Eigen::VectorXd predict_log(const FeatureMatrix& raw22) const;
};

FittedModel fit_model(const SampleSet& train, const ModelSpec& spec);

/// Ordinary least squares on the same design, the comparison baseline.
struct LinearBaseline {
    ZeroStage zero;
    std::vector<std::string> features;
    Eigen::VectorXd coefficients;  // intercept first
    Eigen::VectorXd predict_log(const FeatureMatrix& raw22) const;
};

LinearBaseline fit_baseline(const SampleSet& train, const ModelSpec& spec);

struct FoldResult {
    std::string fold_key;
    Metrics boosted;
    Metrics baseline;
    double mse = 0.0;  // boosted, log space
    std::size_t test_size = 0;
};

struct CvSummary {
    double mean_r2 = 0.0;
    double mean_restricted_r2 = 0.0;
    double mean_accuracy = 0.0;
    double mean_f1 = 0.0;
    double mean_baseline_r2 = 0.0;
    double mean_mse = 0.0;
    std::size_t folds = 0;
};
CvSummary summarize(const std::vector<FoldResult>& folds);

/// Leave-one-country-out over the observed countries in `samples`.
std::vector<FoldResult> loco_cv(const SampleSet& samples, const ModelSpec& spec, int jobs = 1,
                                bool with_baseline = true);
/// Leave-one-product-out over the brands in `samples`.
std::vector<FoldResult> lopo_cv(const SampleSet& samples, const ModelSpec& spec, int jobs = 1,
                                bool with_baseline = true);

/// Observed samples of `year` restricted to the cleaned brand set.
SampleSet training_samples(const Dataset& dataset, Year year, const CleaningOptions& cleaning = {});

struct TuneCell {
    int max_splits = 0;
    int min_parent_size = 0;
    double mse = 0.0;
};

struct TuneResult {
    HyperParams best;
    std::vector<TuneCell> cells;
};

/// Grid search by mean leave-one-product-out MSE. Ties prefer the smaller
/// max_splits, then the larger min_parent_size.
TuneResult tune(const SampleSet& samples, const HyperGrid& grid, const ModelSpec& base, int jobs = 1);

/// Applies one model to every (brand, country) of each year.
ConsumptionMatrix predict_all(const FittedModel& model, const Dataset& dataset, const std::vector<Year>& years);
/// Replaces predictions by observed values where they exist.
ConsumptionMatrix merge_observed(const ConsumptionMatrix& predicted, const Dataset& dataset);

void save_model(const FittedModel& model, std::ostream& out);
FittedModel load_model(std::istream& in);
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

void write_cv_report(const std::vector<FoldResult>& folds, const std::string& path, bool baseline = false);

}  // namespace dtrade
