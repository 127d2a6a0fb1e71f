#include "dtrade/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dtrade/csv.hpp"
#include "dtrade/util.hpp"

namespace dtrade {

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "product_revenue",  "origin_digital_revenue", "sector_world_revenue", "origin_gdp",
        "dest_gdp",         "distance",               "origin_region",        "dest_region",
        "contiguity",       "comlang_official",       "comlang_ethno",        "colony_ever",
        "comcol_post45",    "curcol",                 "col_post45",           "same_country_ever",
        "origin_internet",  "dest_internet",          "origin_fixed_bb",      "dest_fixed_bb",
        "origin_mobile_bb", "dest_mobile_bb",
    };
    return names;
}

bool is_dummy_feature(std::size_t index) { return index >= 8 && index <= 15; }
bool is_region_feature(std::size_t index) { return index == 6 || index == 7; }

std::size_t feature_index(const std::string& name) {
    const auto& names = feature_names();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("unknown feature '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

FeatureVector assemble(const Dataset& ds, const std::string& brand_id, const std::string& dest, Year year) {
    const BrandRecord& brand = ds.brand(brand_id);
    const std::string& origin = brand.origin_country;
    const CountryYear& oc = ds.country_year(origin, year);
    const CountryYear& dc = ds.country_year(dest, year);

    DyadRecord dyad;
    if (const DyadRecord* d = ds.find_dyad(origin, dest)) {
        dyad = *d;
    } else if (origin == dest) {
        dyad.dist_km = 0.0;
        dyad.comlang_official = dyad.comlang_ethno = dyad.same_country_ever = true;
    } else {
        throw Error("missing dyad " + origin + "->" + dest);
    }

    auto lg = [](double v) { return std::log1p(v); };
    auto flag = [](bool b) { return b ? 1.0 : 0.0; };
    FeatureVector f;
    f.values = {
        lg(ds.revenue().world_revenue(brand_id, year)),
        lg(ds.country_digital_revenue(origin, year)),
        lg(ds.sector_world_revenue(brand.sector, year)),
        lg(oc.gdp_ppp),
        lg(dc.gdp_ppp),
        lg(dyad.dist_km),
        static_cast<double>(region_code(ds.country(origin).region)),
        static_cast<double>(region_code(ds.country(dest).region)),
        flag(dyad.contiguity),
        flag(dyad.comlang_official),
        flag(dyad.comlang_ethno),
        flag(dyad.colony_ever),
        flag(dyad.comcol_post45),
        flag(dyad.curcol),
        flag(dyad.col_post45),
        flag(dyad.same_country_ever),
        lg(oc.internet_share),
        lg(dc.internet_share),
        lg(oc.fixed_bb_share),
        lg(dc.fixed_bb_share),
        lg(oc.mobile_bb_share),
        lg(dc.mobile_bb_share),
    };
    for (double v : f.values) {
        if (!std::isfinite(v)) throw Error("non-finite feature for " + brand_id + "/" + dest);
    }
    return f;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<Eigen::Index>& rows) const {
    FeatureMatrix out{names, Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), values.cols())};
    for (std::size_t i = 0; i < rows.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
    return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::string>& columns) const {
    FeatureMatrix out{columns, Eigen::MatrixXd(values.rows(), static_cast<Eigen::Index>(columns.size()))};
    for (std::size_t j = 0; j < columns.size(); ++j) {
        auto it = std::find(names.begin(), names.end(), columns[j]);
        if (it == names.end()) throw Error("unknown feature column '" + columns[j] + "'");
        out.values.col(static_cast<Eigen::Index>(j)) = values.col(it - names.begin());
    }
    return out;
}

SampleSet SampleSet::subset(const std::vector<Eigen::Index>& rows) const {
    SampleSet out;
    out.features = features.select_rows(rows);
    out.target_usd.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.keys.push_back(keys[static_cast<std::size_t>(rows[i])]);
        out.target_usd(static_cast<Eigen::Index>(i)) = target_usd(rows[i]);
    }
    return out;
}

namespace {

SampleSet make_samples(const Dataset& ds, std::vector<SampleKey> keys, std::vector<double> targets) {
    SampleSet s;
    const auto& names = feature_names();
    s.features.names.assign(names.begin(), names.end());
    s.features.values.resize(static_cast<Eigen::Index>(keys.size()), static_cast<Eigen::Index>(kFeatureCount));
    s.target_usd.resize(static_cast<Eigen::Index>(keys.size()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
        auto f = assemble(ds, keys[i].brand, keys[i].country, keys[i].year);
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            s.features.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f.values[j];
        }
        s.target_usd(static_cast<Eigen::Index>(i)) = targets[i];
    }
    s.keys = std::move(keys);
    return s;
}

}  // namespace

SampleSet observed_samples(const Dataset& ds, Year year, const std::vector<std::string>& brands) {
    std::vector<SampleKey> keys;
    std::vector<double> targets;
    std::vector<std::string> wanted = brands;
    std::sort(wanted.begin(), wanted.end());
    for (const auto& e : ds.consumption().entries()) {
        if (e.year != year || e.provenance != Provenance::observed) continue;
        if (!wanted.empty() && !std::binary_search(wanted.begin(), wanted.end(), e.brand_id)) continue;
        keys.push_back({e.brand_id, e.country, e.year});
        targets.push_back(e.consumption_usd);
    }
    return make_samples(ds, std::move(keys), std::move(targets));
}

SampleSet full_grid(const Dataset& ds, Year year) {
    std::vector<SampleKey> keys;
    std::vector<double> targets;
    for (const auto& b : ds.brands()) {
        if (ds.revenue().world_revenue(b.brand_id, year) <= 0.0) continue;
        for (const auto& c : ds.countries()) {
            keys.push_back({b.brand_id, c.code, year});
            targets.push_back(ds.consumption().find(b.brand_id, c.code, year).value_or(0.0));
        }
    }
    return make_samples(ds, std::move(keys), std::move(targets));
}

void write_features_csv(const SampleSet& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    csv::Writer w(f);
    std::vector<std::string> header{"brand_id", "country", "year"};
    header.insert(header.end(), s.features.names.begin(), s.features.names.end());
    header.push_back("consumption_usd");
    w.row(header);
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::vector<std::string> row{s.keys[i].brand, s.keys[i].country, std::to_string(s.keys[i].year)};
        for (Eigen::Index j = 0; j < s.features.cols(); ++j) {
            row.push_back(format_number(s.features.values(static_cast<Eigen::Index>(i), j)));
        }
        row.push_back(format_number(s.target_usd(static_cast<Eigen::Index>(i))));
        w.row(row);
    }
}

// ---------------------------------------------------------------------------
// Logistic regression

double LogisticModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    if (constant) return constant_p;
    double eta = intercept;
    for (Eigen::Index j = 0; j < coefficients.size(); ++j) eta += coefficients(j) * (x(j) - center(j)) / scale(j);
    return 1.0 / (1.0 + std::exp(-eta));
}

Eigen::VectorXd LogisticModel::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd p(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) p(i) = predict_row(X.row(i));
    return p;
}

namespace {

double log_likelihood(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                      double ridge) {
    Eigen::VectorXd eta = Z * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // log(1 + e^eta) without overflow
        double softplus = eta(i) > 0 ? eta(i) + std::log1p(std::exp(-eta(i))) : std::log1p(std::exp(eta(i)));
        ll += y(i) * eta(i) - softplus;
    }
    return ll - 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
}

}  // namespace

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<bool>& labels, double ridge) {
    const Eigen::Index n = X.rows(), p = X.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n || n == 0) {
        throw Error("fit_logistic: labels must match rows and be non-empty");
    }
    LogisticModel m;
    std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    if (positives == 0 || positives == labels.size()) {
        m.constant = true;
        m.constant_p = positives == 0 ? 0.0 : 1.0;
        return m;
    }

    m.center = X.colwise().mean().transpose();
    m.scale.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double sd = std::sqrt((X.col(j).array() - m.center(j)).square().sum() / static_cast<double>(n));
        m.scale(j) = sd > 0.0 ? sd : 1.0;
    }
    Eigen::MatrixXd Z(n, p + 1);
    Z.col(0).setOnes();
    for (Eigen::Index j = 0; j < p; ++j) Z.col(j + 1) = (X.col(j).array() - m.center(j)) / m.scale(j);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    double ybar = y.mean();
    beta(0) = std::log(ybar / (1.0 - ybar));
    double ll = log_likelihood(Z, y, beta, ridge);
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, ridge);
    penalty(0) = 0.0;

    int it = 0;
    for (; it < 500; ++it) {
        Eigen::VectorXd eta = Z * beta;
        Eigen::VectorXd prob = (1.0 + (-eta.array()).exp()).inverse().matrix();
        Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).matrix();
        Eigen::VectorXd grad = Z.transpose() * (y - prob) - penalty.cwiseProduct(beta);
        Eigen::MatrixXd H = Z.transpose() * w.asDiagonal() * Z;
        H.diagonal() += penalty;
        H.diagonal().array() += 1e-12;
        Eigen::VectorXd step = H.ldlt().solve(grad);

        double t = 1.0;
        Eigen::VectorXd next = beta + step;
        double next_ll = log_likelihood(Z, y, next, ridge);
        for (int halving = 0; halving < 40 && !(next_ll >= ll - 1e-12); ++halving) {
            t *= 0.5;
            next = beta + t * step;
            next_ll = log_likelihood(Z, y, next, ridge);
        }
        if (!(next_ll >= ll - 1e-12)) break;
        double change = next_ll - ll;
        beta = next;
        ll = next_ll;
        if (std::abs(change) < 1e-8) {
            ++it;
            break;
        }
    }
    if (!beta.allFinite()) throw Error("fit_logistic: non-finite coefficients");
    m.intercept = beta(0);
    m.coefficients = beta.tail(p);
    m.iterations = it;
    return m;
}

Eigen::MatrixXd ZeroStage::design(const FeatureMatrix& raw) {
    if (raw.cols() != static_cast<Eigen::Index>(kFeatureCount)) throw Error("zero stage expects the 22 raw features");
    const Eigen::Index n_regions = static_cast<Eigen::Index>(region_table().size());
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(raw.rows(), static_cast<Eigen::Index>(kFeatureCount) - 2 + 2 * n_regions);
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        if (is_region_feature(j)) continue;
        D.col(col++) = raw.values.col(static_cast<Eigen::Index>(j));
    }
    for (std::size_t j : {std::size_t{6}, std::size_t{7}}) {
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            int code = static_cast<int>(raw.values(i, static_cast<Eigen::Index>(j)));
            if (code >= 1 && code <= n_regions) D(i, col + code - 1) = 1.0;
        }
        col += n_regions;
    }
    return D;
}

Eigen::VectorXd ZeroStage::predict(const FeatureMatrix& raw) const { return model.predict(design(raw)); }

ZeroStage fit_zero_stage(const FeatureMatrix& raw, const std::vector<bool>& nonzero) {
    return ZeroStage{fit_logistic(ZeroStage::design(raw), nonzero)};
}

// ---------------------------------------------------------------------------
// Importance

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() != yhat.size() || y.size() < 2) throw Error("r_squared: need equal lengths >= 2");
    double m = y.mean();
    double sst = (y.array() - m).square().sum();
    if (sst == 0.0) throw Error("r_squared: zero variance in target");
    double sse = (y - yhat).squaredNorm();
    return 1.0 - sse / sst;
}

double permutation_importance(const Predictor& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              Eigen::Index feature, std::uint64_t seed, int shuffles) {
    if (X.rows() == 0) throw Error("permutation_importance: empty validation set");
    if (feature < 0 || feature >= X.cols()) throw Error("permutation_importance: feature out of range");
    if (shuffles < 1) throw Error("permutation_importance: shuffles must be >= 1");
    double base = r_squared(y, model(X));
    if (!(base > 0.0)) throw Error("uninformative baseline");

    double total = 0.0;
    Eigen::MatrixXd Xp = X;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
    for (int s = 0; s < shuffles; ++s) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(feature), static_cast<std::uint64_t>(s)));
        rng.shuffle(order);
        for (Eigen::Index i = 0; i < X.rows(); ++i) Xp(i, feature) = X(order[static_cast<std::size_t>(i)], feature);
        double permuted = r_squared(y, model(Xp));
        total += (base - permuted) / std::abs(base) * 100.0;
    }
    return total / shuffles;
}

FeatureSubset select_top(const std::map<std::string, double>& importances, std::size_t k) {
    if (k == 0) throw Error("select_top: k must be >= 1");
    if (k > importances.size()) throw Error("select_top: k exceeds the number of features");
    std::vector<std::pair<std::string, double>> v(importances.begin(), importances.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    FeatureSubset out;
    for (std::size_t i = 0; i < k; ++i) {
        out.names.push_back(v[i].first);
        out.scores.push_back(v[i].second);
    }
    return out;
}

}  // namespace dtrade
