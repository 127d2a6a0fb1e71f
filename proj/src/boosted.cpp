#include "dtrade/boosted.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "dtrade/csv.hpp"
#include "dtrade/util.hpp"

namespace dtrade {

// ---------------------------------------------------------------------------
// Trees

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = row(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

int RegressionTree::split_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

int RegressionTree::depth() const {
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int best = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        const auto& n = nodes[static_cast<std::size_t>(i)];
        if (!n.is_leaf()) {
            stack.emplace_back(n.left, d + 1);
            stack.emplace_back(n.right, d + 1);
        }
    }
    return best;
}

PresortedColumns PresortedColumns::build(const Eigen::MatrixXd& X) {
    PresortedColumns p;
    p.order.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& o = p.order[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(X.rows()));
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
    }
    return p;
}

namespace {

struct Candidate {
    bool valid = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

struct Frontier {
    int node = 0;
    std::vector<std::vector<int>> members;  // per feature, sorted by that feature
    double sum = 0.0;
    Candidate best;
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& r, int max_splits, int min_parent, int rotate)
        : X_(X), r_(r), max_splits_(max_splits), min_parent_(std::max(min_parent, 2)), rotate_(rotate),
          goes_left_(static_cast<std::size_t>(X.rows()), 0) {}

    RegressionTree build(std::vector<std::vector<int>> root_members) {
        RegressionTree tree;
        Frontier root;
        root.node = 0;
        root.members = std::move(root_members);
        const auto& any = root.members.empty() ? fallback_ : root.members[0];
        if (root.members.empty()) {
            fallback_.resize(static_cast<std::size_t>(X_.rows()));
            std::iota(fallback_.begin(), fallback_.end(), 0);
        }
        for (int i : any) root.sum += r_(i);
        int n_root = static_cast<int>(any.size());
        tree.nodes.push_back({-1, 0.0, -1, -1, root.sum / n_root, n_root});
        if (root.members.empty()) return tree;

        evaluate(root);
        std::vector<Frontier> frontier;
        frontier.push_back(std::move(root));
        int splits = 0;
        while (splits < max_splits_) {
            int pick = -1;
            for (std::size_t k = 0; k < frontier.size(); ++k) {
                if (!frontier[k].best.valid) continue;
                if (pick < 0 || frontier[k].best.gain > frontier[static_cast<std::size_t>(pick)].best.gain ||
                    (frontier[k].best.gain == frontier[static_cast<std::size_t>(pick)].best.gain &&
                     frontier[k].node < frontier[static_cast<std::size_t>(pick)].node)) {
                    pick = static_cast<int>(k);
                }
            }
            if (pick < 0) break;
            Frontier parent = std::move(frontier[static_cast<std::size_t>(pick)]);
            frontier.erase(frontier.begin() + pick);

            const int f = parent.best.feature;
            const double thr = parent.best.threshold;
            for (int i : parent.members[0]) goes_left_[static_cast<std::size_t>(i)] = X_(i, f) <= thr ? 1 : 0;

            Frontier left, right;
            left.members.resize(parent.members.size());
            right.members.resize(parent.members.size());
            for (std::size_t k = 0; k < parent.members.size(); ++k) {
                for (int i : parent.members[k]) {
                    (goes_left_[static_cast<std::size_t>(i)] ? left : right).members[k].push_back(i);
                }
            }
            for (int i : left.members[0]) left.sum += r_(i);
            for (int i : right.members[0]) right.sum += r_(i);

            auto& pn = tree.nodes[static_cast<std::size_t>(parent.node)];
            pn.feature = f;
            pn.threshold = thr;
            left.node = static_cast<int>(tree.nodes.size());
            right.node = left.node + 1;
            pn.left = left.node;
            pn.right = right.node;
            int nl = static_cast<int>(left.members[0].size());
            int nr = static_cast<int>(right.members[0].size());
            tree.nodes.push_back({-1, 0.0, -1, -1, left.sum / nl, nl});
            tree.nodes.push_back({-1, 0.0, -1, -1, right.sum / nr, nr});
            ++splits;

            evaluate(left);
            evaluate(right);
            frontier.push_back(std::move(left));
            frontier.push_back(std::move(right));
        }
        return tree;
    }

private:
    void evaluate(Frontier& node) {
        node.best = {};
        const auto& first = node.members[0];
        const int n = static_cast<int>(first.size());
        if (n < min_parent_ || n < 2) return;
        double ss = 0.0;
        for (int i : first) ss += r_(i) * r_(i);
        const double parent_term = node.sum * node.sum / n;
        const double min_gain = 1e-12 * ss;

        // Exact gain ties go to the first feature in rotated order, so collinear copies share the work.
        const std::size_t p = node.members.size();
        for (std::size_t j = 0; j < p; ++j) {
            const std::size_t f = (j + static_cast<std::size_t>(rotate_)) % p;
            const auto& list = node.members[f];
            const auto col = static_cast<Eigen::Index>(f);
            double left_sum = 0.0;
            for (int k = 0; k + 1 < n; ++k) {
                left_sum += r_(list[static_cast<std::size_t>(k)]);
                double x0 = X_(list[static_cast<std::size_t>(k)], col);
                double x1 = X_(list[static_cast<std::size_t>(k + 1)], col);
                if (!(x0 < x1)) continue;
                int nl = k + 1, nr = n - nl;
                double right_sum = node.sum - left_sum;
                double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_term;
                if (gain > min_gain && (!node.best.valid || gain > node.best.gain)) {
                    double mid = x0 + (x1 - x0) / 2.0;
                    if (!(mid < x1)) mid = x0;
                    node.best = {true, static_cast<int>(f), mid, gain};
                }
            }
        }
    }

    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& r_;
    int max_splits_;
    int min_parent_;
    int rotate_;
    std::vector<char> goes_left_;
    std::vector<int> fallback_;
};

}  // namespace

RegressionTree fit_tree(const Eigen::MatrixXd& X, const PresortedColumns& sorted, const Eigen::VectorXd& target,
                        int max_splits, int min_parent, int rotate) {
    if (X.rows() == 0 || target.size() != X.rows()) throw Error("fit_tree: empty input");
    if (max_splits < 0) throw Error("fit_tree: max_splits must be >= 0");
    TreeBuilder builder(X, target, max_splits, min_parent, std::max(rotate, 0));
    if (X.cols() == 0) return builder.build({});
    return builder.build(sorted.order);
}

RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& target, int max_splits, int min_parent) {
    if (X.rows() == 0) throw Error("fit_tree: empty input");
    return fit_tree(X, PresortedColumns::build(X), target, max_splits, min_parent);
}

double BoostedEnsemble::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(row);
    return base + params.learn_rate * s;
}

Eigen::VectorXd BoostedEnsemble::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(X.row(i));
    return out;
}

BoostedEnsemble fit_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& params) {
    if (X.rows() == 0 || y.size() != X.rows()) throw Error("fit_ensemble: empty input");
    if (params.n_cycles < 0 || params.learn_rate < 0.0) throw Error("fit_ensemble: invalid parameters");
    BoostedEnsemble e;
    e.params = params;
    e.base = y.mean();
    const double n = static_cast<double>(y.size());
    Eigen::VectorXd pred = Eigen::VectorXd::Constant(y.size(), e.base);
    Eigen::VectorXd tree_sum = Eigen::VectorXd::Zero(y.size());
    e.training_mse.push_back((y - pred).squaredNorm() / n);
    PresortedColumns sorted = PresortedColumns::build(X);
    e.trees.reserve(static_cast<std::size_t>(params.n_cycles));
    for (int t = 0; t < params.n_cycles; ++t) {
        Eigen::VectorXd residual = y - pred;
        RegressionTree tree = fit_tree(X, sorted, residual, params.max_splits, params.min_parent_size, t);
        for (Eigen::Index i = 0; i < X.rows(); ++i) tree_sum(i) += tree.predict(X.row(i));
        pred = (Eigen::VectorXd::Constant(y.size(), e.base).array() + params.learn_rate * tree_sum.array()).matrix();
        double mse = (y - pred).squaredNorm() / n;
        double prev = e.training_mse.back();
        if (mse > prev * (1.0 + 1e-9) + 1e-300) {
            throw std::logic_error("fit_ensemble: training MSE increased at cycle " + std::to_string(t + 1));
        }
        e.training_mse.push_back(mse);
        e.trees.push_back(std::move(tree));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Metrics

double to_usd(double yhat_log, double zero_threshold) {
    double v = std::expm1(yhat_log);
    if (!(v > 0.0)) return 0.0;
    // log1p/expm1 round trips can land an ulp or two under the threshold
    if (v < zero_threshold && v >= zero_threshold * (1.0 - 1e-12)) return zero_threshold;
    return v < zero_threshold ? 0.0 : v;
}

Metrics metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, double zero_threshold) {
    if (y.size() != yhat.size() || y.size() < 2) throw Error("metrics: need equal lengths >= 2");
    Eigen::VectorXd ly = y.array().log1p().matrix();
    Eigen::VectorXd lyhat = yhat.cwiseMax(0.0).array().log1p().matrix();
    Metrics m;
    m.r2 = r_squared(ly, lyhat);

    std::vector<Eigen::Index> nonzero;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) >= zero_threshold) nonzero.push_back(i);
    }
    m.restricted_r2 = std::numeric_limits<double>::quiet_NaN();
    if (nonzero.size() >= 2) {
        Eigen::VectorXd a(static_cast<Eigen::Index>(nonzero.size())), b(a.size());
        for (std::size_t k = 0; k < nonzero.size(); ++k) {
            a(static_cast<Eigen::Index>(k)) = ly(nonzero[k]);
            b(static_cast<Eigen::Index>(k)) = lyhat(nonzero[k]);
        }
        double sst = (a.array() - a.mean()).square().sum();
        if (sst > 0.0) m.restricted_r2 = 1.0 - (a - b).squaredNorm() / sst;
    }

    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        bool actual = y(i) >= zero_threshold;
        bool predicted = yhat(i) >= zero_threshold;
        if (actual && predicted) ++tp;
        else if (!actual && !predicted) ++tn;
        else if (predicted) ++fp;
        else ++fn;
    }
    m.accuracy = (tp + tn) / static_cast<double>(y.size());
    // No positives on either side is a perfect (vacuous) classification.
    m.f1 = (tp + fp + fn) == 0 ? 1.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    return m;
}

// ---------------------------------------------------------------------------
// Cleaning

CleaningResult clean_training_set(const Dataset& ds, Year year, const CleaningOptions& options) {
    std::set<std::string> observed_brands;
    for (const auto& e : ds.consumption().entries()) {
        if (e.year == year && e.provenance == Provenance::observed) observed_brands.insert(e.brand_id);
    }
    if (observed_brands.empty()) throw Error("no observed consumption for year " + std::to_string(year));

    CleaningResult result;
    std::vector<std::string> passing;
    for (const auto& b : observed_brands) {
        double rev = ds.revenue().world_revenue(b, year);
        if (rev < options.min_revenue_usd) result.removed.emplace_back(b, "revenue below threshold");
        else passing.push_back(b);
    }

    const auto& countries = ds.observed_countries();
    std::map<std::string, std::vector<double>> vectors;
    for (const auto& b : passing) {
        auto& v = vectors[b];
        for (const auto& c : countries) v.push_back(ds.consumption().find(b, c, year).value_or(0.0));
    }
    for (const auto& b : passing) {
        const std::string& origin = ds.brand(b).origin_country;
        double sum = 0.0;
        int defined = 0;
        for (const auto& other : passing) {
            if (other == b || ds.brand(other).origin_country != origin) continue;
            double r = countries.size() >= 2 ? pearson(vectors[b], vectors[other])
                                             : std::numeric_limits<double>::quiet_NaN();
            if (std::isnan(r)) continue;
            sum += r;
            ++defined;
        }
        if (defined > 0 && sum / defined < options.min_peer_correlation) {
            result.removed.emplace_back(b, "low correlation with co-national peers");
        } else {
            result.kept.push_back(b);
        }
    }
    if (result.kept.empty()) throw Error("cleaning removed every brand for year " + std::to_string(year));
    return result;
}

SampleSet training_samples(const Dataset& ds, Year year, const CleaningOptions& cleaning) {
    auto cleaned = clean_training_set(ds, year, cleaning);
    return observed_samples(ds, year, cleaned.kept);
}

// ---------------------------------------------------------------------------
// Full model

namespace {

std::vector<std::string> resolve_features(const std::vector<std::string>& requested) {
    if (!requested.empty()) {
        for (const auto& f : requested) feature_index(f);
        return requested;
    }
    const auto& all = feature_names();
    return {all.begin(), all.end()};
}

std::vector<bool> nonzero_labels(const Eigen::VectorXd& y_usd, double threshold) {
    std::vector<bool> labels(static_cast<std::size_t>(y_usd.size()));
    for (Eigen::Index i = 0; i < y_usd.size(); ++i) labels[static_cast<std::size_t>(i)] = y_usd(i) >= threshold;
    return labels;
}

Eigen::MatrixXd regressor_design(const FeatureMatrix& raw, const std::vector<std::string>& features,
                                 const ZeroStage& zero) {
    FeatureMatrix sel = raw.select_columns(features);
    Eigen::MatrixXd D(raw.rows(), sel.cols() + 1);
    D.leftCols(sel.cols()) = sel.values;
    D.col(sel.cols()) = zero.predict(raw);
    return D;
}

// Training rows get out-of-fold zero probabilities so the regressor sees the
// same kind of value it will get on unseen rows.
Eigen::MatrixXd crossfit_design(const FeatureMatrix& raw, const std::vector<std::string>& features,
                                const std::vector<bool>& labels, const ZeroStage& full) {
    Eigen::MatrixXd D = regressor_design(raw, features, full);
    const int k = 5;
    if (raw.rows() < 2 * k) return D;
    for (int f = 0; f < k; ++f) {
        std::vector<Eigen::Index> tr, te;
        std::vector<bool> lab;
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            if (i % k == f) te.push_back(i); else { tr.push_back(i); lab.push_back(labels[static_cast<std::size_t>(i)]); }
        }
        ZeroStage z = fit_zero_stage(raw.select_rows(tr), lab);
        Eigen::VectorXd p = z.predict(raw.select_rows(te));
        for (std::size_t j = 0; j < te.size(); ++j) D(te[j], D.cols() - 1) = p(static_cast<Eigen::Index>(j));
    }
    return D;
}

}  // namespace

Eigen::MatrixXd FittedModel::design(const FeatureMatrix& raw) const { return regressor_design(raw, features, zero); }

Eigen::VectorXd FittedModel::predict_log(const FeatureMatrix& raw) const { return ensemble.predict(design(raw)); }

FittedModel fit_model(const SampleSet& train, const ModelSpec& spec) {
    if (train.size() == 0) throw Error("fit_model: empty training set");
    FittedModel m;
    m.features = resolve_features(spec.features);
    m.zero_threshold = spec.zero_threshold;
    auto labels = nonzero_labels(train.target_usd, spec.zero_threshold);
    m.zero = fit_zero_stage(train.features, labels);
    Eigen::VectorXd y = train.target_usd.array().log1p().matrix();
    m.ensemble = fit_ensemble(crossfit_design(train.features, m.features, labels, m.zero), y, spec.params);
    return m;
}

Eigen::VectorXd LinearBaseline::predict_log(const FeatureMatrix& raw) const {
    Eigen::MatrixXd D = regressor_design(raw, features, zero);
    return (D * coefficients.tail(coefficients.size() - 1)).array() + coefficients(0);
}

LinearBaseline fit_baseline(const SampleSet& train, const ModelSpec& spec) {
    if (train.size() == 0) throw Error("fit_baseline: empty training set");
    LinearBaseline b;
    b.features = resolve_features(spec.features);
    auto labels = nonzero_labels(train.target_usd, spec.zero_threshold);
    b.zero = fit_zero_stage(train.features, labels);
    Eigen::MatrixXd D = crossfit_design(train.features, b.features, labels, b.zero);
    Eigen::MatrixXd A(D.rows(), D.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(D.cols()) = D;
    Eigen::VectorXd y = train.target_usd.array().log1p().matrix();
    b.coefficients = A.colPivHouseholderQr().solve(y);
    return b;
}

namespace {

Metrics safe_metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, double threshold) {
    try {
        return metrics(y, yhat, threshold);
    } catch (const Error&) {
        // Undefined R^2 (constant or single-row hold-out): keep classification scores.
        Metrics m;
        m.r2 = m.restricted_r2 = std::numeric_limits<double>::quiet_NaN();
        if (y.size() >= 1) {
            double correct = 0, tp = 0, fp = 0, fn = 0;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                bool a = y(i) >= threshold, p = yhat(i) >= threshold;
                correct += a == p;
                tp += a && p;
                fp += !a && p;
                fn += a && !p;
            }
            m.accuracy = correct / static_cast<double>(y.size());
            m.f1 = (tp + fp + fn) == 0 ? 1.0 : 2.0 * tp / (2.0 * tp + fp + fn);
        }
        return m;
    }
}

Eigen::VectorXd usd_of(const Eigen::VectorXd& log_pred, double threshold) {
    Eigen::VectorXd out(log_pred.size());
    for (Eigen::Index i = 0; i < log_pred.size(); ++i) out(i) = to_usd(log_pred(i), threshold);
    return out;
}

std::vector<FoldResult> run_folds(const SampleSet& samples, const ModelSpec& spec, int jobs, bool with_baseline,
                                  const std::string& prefix,
                                  const std::function<std::string(const SampleKey&)>& group_of) {
    std::vector<std::string> groups;
    for (const auto& k : samples.keys) groups.push_back(group_of(k));
    std::vector<std::string> unique = groups;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (unique.size() < 2) throw Error(prefix + " cross-validation needs at least 2 groups, found " +
                                       std::to_string(unique.size()));

    std::vector<FoldResult> results(unique.size());
    parallel_for(unique.size(), jobs, [&](std::size_t g) {
        std::vector<Eigen::Index> train_rows, test_rows;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            (groups[i] == unique[g] ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
        }
        SampleSet train = samples.subset(train_rows);
        SampleSet test = samples.subset(test_rows);
        FittedModel model = fit_model(train, spec);
        Eigen::VectorXd pred_log = model.predict_log(test.features);
        Eigen::VectorXd y_log = test.target_usd.array().log1p().matrix();

        FoldResult r;
        r.fold_key = prefix + ":" + unique[g];
        r.test_size = test.size();
        r.mse = (y_log - pred_log).squaredNorm() / static_cast<double>(test.size());
        r.boosted = safe_metrics(test.target_usd, usd_of(pred_log, spec.zero_threshold), spec.zero_threshold);
        if (with_baseline) {
            LinearBaseline base = fit_baseline(train, spec);
            r.baseline = safe_metrics(test.target_usd, usd_of(base.predict_log(test.features), spec.zero_threshold),
                                      spec.zero_threshold);
        }
        results[g] = r;
    });
    return results;
}

}  // namespace

std::vector<FoldResult> loco_cv(const SampleSet& samples, const ModelSpec& spec, int jobs, bool with_baseline) {
    return run_folds(samples, spec, jobs, with_baseline, "loco", [](const SampleKey& k) { return k.country; });
}

std::vector<FoldResult> lopo_cv(const SampleSet& samples, const ModelSpec& spec, int jobs, bool with_baseline) {
    return run_folds(samples, spec, jobs, with_baseline, "lopo", [](const SampleKey& k) { return k.brand; });
}

CvSummary summarize(const std::vector<FoldResult>& folds) {
    CvSummary s;
    s.folds = folds.size();
    auto avg = [&](auto get) {
        double total = 0.0;
        int n = 0;
        for (const auto& f : folds) {
            double v = get(f);
            if (std::isnan(v)) continue;
            total += v;
            ++n;
        }
        return n ? total / n : std::numeric_limits<double>::quiet_NaN();
    };
    s.mean_r2 = avg([](const FoldResult& f) { return f.boosted.r2; });
    s.mean_restricted_r2 = avg([](const FoldResult& f) { return f.boosted.restricted_r2; });
    s.mean_accuracy = avg([](const FoldResult& f) { return f.boosted.accuracy; });
    s.mean_f1 = avg([](const FoldResult& f) { return f.boosted.f1; });
    s.mean_baseline_r2 = avg([](const FoldResult& f) { return f.baseline.r2; });
    s.mean_mse = avg([](const FoldResult& f) { return f.mse; });
    return s;
}

TuneResult tune(const SampleSet& samples, const HyperGrid& grid, const ModelSpec& base, int jobs) {
    if (grid.max_splits.empty() || grid.min_parent_size.empty()) throw Error("tune: empty grid");
    TuneResult result;
    bool have = false;
    TuneCell best;
    for (int ms : grid.max_splits) {
        for (int mp : grid.min_parent_size) {
            ModelSpec spec = base;
            spec.params.max_splits = ms;
            spec.params.min_parent_size = mp;
            auto folds = lopo_cv(samples, spec, jobs, false);
            TuneCell cell{ms, mp, summarize(folds).mean_mse};
            result.cells.push_back(cell);
            bool better = !have || cell.mse < best.mse ||
                          (cell.mse == best.mse &&
                           (cell.max_splits < best.max_splits ||
                            (cell.max_splits == best.max_splits && cell.min_parent_size > best.min_parent_size)));
            if (better) {
                best = cell;
                have = true;
            }
        }
    }
    result.best = base.params;
    result.best.max_splits = best.max_splits;
    result.best.min_parent_size = best.min_parent_size;
    return result;
}

// ---------------------------------------------------------------------------
// Prediction

ConsumptionMatrix predict_all(const FittedModel& model, const Dataset& ds, const std::vector<Year>& years) {
    std::vector<ConsumptionEntry> entries;
    for (Year y : years) {
        SampleSet grid = full_grid(ds, y);
        if (grid.size() == 0) continue;
        Eigen::VectorXd pred = model.predict_log(grid.features);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double usd = to_usd(pred(static_cast<Eigen::Index>(i)), model.zero_threshold);
            entries.push_back({grid.keys[i].brand, grid.keys[i].country, y, usd, Provenance::predicted});
        }
    }
    return ConsumptionMatrix(std::move(entries));
}

ConsumptionMatrix merge_observed(const ConsumptionMatrix& predicted, const Dataset& ds) {
    std::vector<ConsumptionEntry> entries = predicted.entries();
    for (auto& e : entries) {
        if (auto obs = ds.consumption().find(e.brand_id, e.country, e.year)) {
            e.consumption_usd = *obs;
            e.provenance = Provenance::observed;
        }
    }
    return ConsumptionMatrix(std::move(entries));
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_vector(std::ostream& out, const char* name, const Eigen::VectorXd& v) {
    out << name << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_number(v(i));
    out << '\n';
}

void expect(std::istream& in, const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw Error("model file: expected '" + word + "', found '" + got + "'");
}

double read_double(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw Error("model file: truncated");
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw Error("model file: bad number '" + tok + "'");
        return v;
    } catch (const std::exception&) {
        throw Error("model file: bad number '" + tok + "'");
    }
}

long read_int(std::istream& in) {
    long v = 0;
    if (!(in >> v)) throw Error("model file: expected integer");
    return v;
}

Eigen::VectorXd read_vector(std::istream& in, const char* name) {
    expect(in, name);
    long n = read_int(in);
    if (n < 0) throw Error("model file: negative length");
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v(i) = read_double(in);
    return v;
}

}  // namespace

void save_model(const FittedModel& m, std::ostream& out) {
    out << "dtrade-model 1\n";
    out << "zero_threshold " << format_number(m.zero_threshold) << '\n';
    out << "features " << m.features.size();
    for (const auto& f : m.features) out << ' ' << f;
    out << '\n';
    const auto& p = m.ensemble.params;
    out << "params max_splits " << p.max_splits << " min_parent_size " << p.min_parent_size << " learn_rate "
        << format_number(p.learn_rate) << " n_cycles " << p.n_cycles << '\n';
    const auto& lm = m.zero.model;
    out << "logistic constant " << (lm.constant ? 1 : 0) << " p " << format_number(lm.constant_p) << " intercept "
        << format_number(lm.intercept) << '\n';
    write_vector(out, "coefficients", lm.coefficients);
    write_vector(out, "center", lm.center);
    write_vector(out, "scale", lm.scale);
    out << "base " << format_number(m.ensemble.base) << '\n';
    out << "trees " << m.ensemble.trees.size() << '\n';
    for (const auto& t : m.ensemble.trees) {
        out << "tree " << t.nodes.size() << '\n';
        for (const auto& n : t.nodes) {
            out << n.feature << ' ' << format_number(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
                << format_number(n.value) << ' ' << n.samples << '\n';
        }
    }
}

FittedModel load_model(std::istream& in) {
    FittedModel m;
    expect(in, "dtrade-model");
    if (read_int(in) != 1) throw Error("model file: unsupported version");
    expect(in, "zero_threshold");
    m.zero_threshold = read_double(in);
    expect(in, "features");
    long nf = read_int(in);
    for (long i = 0; i < nf; ++i) {
        std::string f;
        in >> f;
        feature_index(f);
        m.features.push_back(f);
    }
    auto& p = m.ensemble.params;
    expect(in, "params");
    expect(in, "max_splits");
    p.max_splits = static_cast<int>(read_int(in));
    expect(in, "min_parent_size");
    p.min_parent_size = static_cast<int>(read_int(in));
    expect(in, "learn_rate");
    p.learn_rate = read_double(in);
    expect(in, "n_cycles");
    p.n_cycles = static_cast<int>(read_int(in));
    auto& lm = m.zero.model;
    expect(in, "logistic");
    expect(in, "constant");
    lm.constant = read_int(in) != 0;
    expect(in, "p");
    lm.constant_p = read_double(in);
    expect(in, "intercept");
    lm.intercept = read_double(in);
    lm.coefficients = read_vector(in, "coefficients");
    lm.center = read_vector(in, "center");
    lm.scale = read_vector(in, "scale");
    expect(in, "base");
    m.ensemble.base = read_double(in);
    expect(in, "trees");
    long nt = read_int(in);
    for (long t = 0; t < nt; ++t) {
        expect(in, "tree");
        long nn = read_int(in);
        RegressionTree tree;
        for (long k = 0; k < nn; ++k) {
            TreeNode n;
            n.feature = static_cast<int>(read_int(in));
            n.threshold = read_double(in);
            n.left = static_cast<int>(read_int(in));
            n.right = static_cast<int>(read_int(in));
            n.value = read_double(in);
            n.samples = static_cast<int>(read_int(in));
            if (!n.is_leaf() && (n.left <= k || n.right <= k || n.left >= nn || n.right >= nn)) {
                throw Error("model file: bad child index");
            }
            tree.nodes.push_back(n);
        }
        m.ensemble.trees.push_back(std::move(tree));
    }
    return m;
}

void save_model(const FittedModel& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    save_model(m, f);
}

FittedModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    return load_model(f);
}

void write_cv_report(const std::vector<FoldResult>& folds, const std::string& path, bool baseline) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    csv::Writer w(f);
    w.row({"fold_key", "r2", "restricted_r2", "accuracy", "f1"});
    auto num = [](double v) { return std::isnan(v) ? std::string() : format_number(v); };
    for (const auto& r : folds) {
        const Metrics& m = baseline ? r.baseline : r.boosted;
        w.row({r.fold_key, num(m.r2), num(m.restricted_r2), num(m.accuracy), num(m.f1)});
    }
}

}  // namespace dtrade
