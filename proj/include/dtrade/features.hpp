#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dtrade/data_model.hpp"

namespace dtrade {

inline constexpr std::size_t kFeatureCount = 22;

/// Column names, in assembly order.
const std::array<std::string, kFeatureCount>& feature_names();
/// True for the untransformed 0/1 columns (contiguity and the cultural dummies).
bool is_dummy_feature(std::size_t index);
bool is_region_feature(std::size_t index);
std::size_t feature_index(const std::string& name);

/// The gravity, size and ICT covariates for one (brand, destination, year),
/// plus the zero-stage probability once a zero stage has been applied.
struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    double zero_prob = 0.0;
};

/// Continuous inputs are log(x + 1); dummies are 0/1; regions are ordinal codes.
/// Domestic pairs without a self dyad use distance 0 and a shared language.
FeatureVector assemble(const Dataset& dataset, const std::string& brand, const std::string& dest, Year year);

struct FeatureMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd values;  // rows = samples

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    FeatureMatrix select_rows(const std::vector<Eigen::Index>& rows) const;
    FeatureMatrix select_columns(const std::vector<std::string>& columns) const;
};

struct SampleKey {
    std::string brand;
    std::string country;
    Year year = 0;
    auto operator<=>(const SampleKey&) const = default;
};

/// Samples with their 22 raw features and observed USD targets.
struct SampleSet {
    std::vector<SampleKey> keys;
    FeatureMatrix features;
    Eigen::VectorXd target_usd;

    std::size_t size() const { return keys.size(); }
    SampleSet subset(const std::vector<Eigen::Index>& rows) const;
};

/// All observed consumption entries of `year` for the given brands (all brands when empty).
SampleSet observed_samples(const Dataset& dataset, Year year, const std::vector<std::string>& brands = {});
/// Every (brand with revenue, country) pair of a year, for prediction.
SampleSet full_grid(const Dataset& dataset, Year year);

void write_features_csv(const SampleSet& samples, const std::string& path);

// ---------------------------------------------------------------------------
// Zero stage

struct LogisticModel {
    Eigen::VectorXd coefficients;  // on standardized inputs
    double intercept = 0.0;
    Eigen::VectorXd center;
    Eigen::VectorXd scale;
    bool constant = false;
    double constant_p = 0.0;
    int iterations = 0;

    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// L2-regularized maximum likelihood by Newton/IRLS. Stops when the
/// log-likelihood changes by less than 1e-8 or after 500 iterations.
/// Single-class labels produce a constant model instead of failing.
LogisticModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<bool>& labels, double ridge = 1e-6);

/// Logistic model over the raw 22 features, with regions one-hot encoded.
struct ZeroStage {
    LogisticModel model;

    static Eigen::MatrixXd design(const FeatureMatrix& raw22);
    Eigen::VectorXd predict(const FeatureMatrix& raw22) const;
};

ZeroStage fit_zero_stage(const FeatureMatrix& raw22, const std::vector<bool>& nonzero);

// ---------------------------------------------------------------------------
// Importance

using Predictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

/// Percent decrease of R^2 when column `feature` is shuffled, averaged over
/// `shuffles` deterministic permutations.
double permutation_importance(const Predictor& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              Eigen::Index feature, std::uint64_t seed, int shuffles = 5);

struct FeatureSubset {
    std::vector<std::string> names;
    std::vector<double> scores;
};

/// Top-k by score; equal scores ordered by name.
FeatureSubset select_top(const std::map<std::string, double>& importances, std::size_t k = 11);

}  // namespace dtrade
