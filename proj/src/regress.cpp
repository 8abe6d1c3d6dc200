#include "pavetex/regress.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "pavetex/errors.hpp"
#include "pavetex/rng.hpp"

namespace pavetex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void check_feature_subset(const std::vector<std::string>& names) {
    if (names.empty()) throw ConfigError("feature subset is empty");
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n != "p" && n != "d" && n != "k") throw ConfigError("unknown feature name: " + n);
        if (!seen.insert(n).second) throw ConfigError("duplicate feature name: " + n);
    }
}

}  // namespace

double feature_value(const FeatureVector& f, const std::string& name) {
    if (name == "p") return f.p;
    if (name == "d") return f.d;
    if (name == "k") return f.k;
    throw ConfigError("unknown feature name: " + name);
}

namespace {

void set_feature_value(FeatureVector& f, const std::string& name, double v) {
    if (name == "p") {
        f.p = v;
    } else if (name == "d") {
        f.d = v;
    } else if (name == "k") {
        f.k = v;
    } else {
        throw ConfigError("unknown feature name: " + name);
    }
}

}  // namespace

std::vector<std::vector<double>> design_matrix(const Dataset& ds) {
    std::vector<std::vector<double>> x(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        x[i].reserve(ds.feature_names.size());
        for (const auto& name : ds.feature_names) {
            x[i].push_back(feature_value(ds.samples[i].features, name));
        }
    }
    return x;
}

std::vector<double> labels(const Dataset& ds) {
    std::vector<double> y;
    y.reserve(ds.samples.size());
    for (const auto& s : ds.samples) y.push_back(s.mtd);
    return y;
}

// ---------------------------------------------------------------------------
// Scaling and splitting

Scaler zscore_fit(const Dataset& train) {
    if (train.samples.empty()) throw TooFewSamplesError("cannot fit a scaler on an empty set");
    check_feature_subset(train.feature_names);
    Scaler sc;
    sc.feature_names = train.feature_names;
    const double n = static_cast<double>(train.samples.size());
    for (const auto& name : train.feature_names) {
        double sum = 0.0;
        for (const auto& s : train.samples) sum += feature_value(s.features, name);
        const double mu = sum / n;
        double ss = 0.0;
        for (const auto& s : train.samples) {
            const double d = feature_value(s.features, name) - mu;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / n);  // population
        if (sd <= 0.0) throw ZeroVarianceError("feature '" + name + "' is constant");
        sc.mean.push_back(mu);
        sc.std_dev.push_back(sd);
    }
    return sc;
}

namespace {

FeatureVector scale_features(const Scaler& sc, FeatureVector f) {
    for (std::size_t j = 0; j < sc.feature_names.size(); ++j) {
        const double v = feature_value(f, sc.feature_names[j]);
        set_feature_value(f, sc.feature_names[j], (v - sc.mean[j]) / sc.std_dev[j]);
    }
    return f;
}

}  // namespace

Dataset zscore_apply(const Scaler& scaler, const Dataset& ds) {
    if (scaler.feature_names != ds.feature_names) {
        throw ShapeMismatchError("scaler features do not match the dataset");
    }
    Dataset out = ds;
    for (auto& s : out.samples) s.features = scale_features(scaler, s.features);
    return out;
}

namespace {

// Stratum labels in sorted order, each with its member sample indices sorted
// by id. Shared by the split and the fold assignment so both are pure
// functions of (ids, seed).
std::vector<std::pair<std::string, std::vector<int>>> strata_by_id(const Dataset& ds) {
    std::map<std::string, std::vector<int>> groups;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (!ids.insert(ds.samples[i].id).second) {
            throw Error("duplicate sample id: " + ds.samples[i].id);
        }
        groups[ds.samples[i].mixture].push_back(static_cast<int>(i));
    }
    std::vector<std::pair<std::string, std::vector<int>>> out(groups.begin(), groups.end());
    for (auto& [name, members] : out) {
        std::sort(members.begin(), members.end(), [&](int a, int b) {
            return ds.samples[static_cast<std::size_t>(a)].id <
                   ds.samples[static_cast<std::size_t>(b)].id;
        });
    }
    return out;
}

}  // namespace

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double holdout_fraction,
                                             std::uint64_t seed) {
    if (!(holdout_fraction >= 0.0 && holdout_fraction <= 1.0)) {
        throw ConfigError("holdout fraction must lie in [0, 1]");
    }
    std::vector<bool> held(ds.samples.size(), false);
    for (auto& [name, members] : strata_by_id(ds)) {
        if (members.size() < 2) throw StratumTooSmallError("stratum '" + name + "' has fewer than 2 samples");
        Rng rng(mix_seed(seed, fnv1a(name)));
        rng.shuffle(members);
        const auto h = static_cast<std::size_t>(
            std::llround(holdout_fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < h; ++i) held[static_cast<std::size_t>(members[i])] = true;
    }
    Dataset train, holdout;
    train.feature_names = holdout.feature_names = ds.feature_names;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        (held[i] ? holdout : train).samples.push_back(ds.samples[i]);
    }
    return {std::move(train), std::move(holdout)};
}

// ---------------------------------------------------------------------------
// Linear diagnostics

namespace {

Eigen::MatrixXd design_with_intercept(const Dataset& ds, const std::vector<std::string>& names) {
    const auto n = static_cast<Eigen::Index>(ds.samples.size());
    const auto m = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd a(n, m + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            a(i, j) = feature_value(ds.samples[static_cast<std::size_t>(i)].features,
                                    names[static_cast<std::size_t>(j)]);
        }
        a(i, m) = 1.0;
    }
    return a;
}

}  // namespace

double adjusted_r2(double r2, int n, int m) {
    return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - m - 1);
}

double vif_from_r2(double r2) {
    if (r2 >= 1.0 - 1e-12) return kInf;
    return 1.0 / (1.0 - r2);
}

LinearFit ols_fit(const Dataset& ds, const std::vector<std::string>& feature_subset) {
    check_feature_subset(feature_subset);
    const int n = static_cast<int>(ds.samples.size());
    const int m = static_cast<int>(feature_subset.size());
    if (n <= m + 1) throw TooFewSamplesError("need more samples than coefficients");

    const Eigen::MatrixXd a = design_with_intercept(ds, feature_subset);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = ds.samples[static_cast<std::size_t>(i)].mtd;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < m + 1) throw RankDeficientError("design matrix is rank deficient");
    const Eigen::VectorXd beta = qr.solve(y);

    const Eigen::VectorXd resid = y - a * beta;
    const double sse = resid.squaredNorm();
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).matrix().squaredNorm();
    if (sst <= 0.0) throw ConstantLabelsError("labels are constant");

    LinearFit fit;
    fit.feature_names = feature_subset;
    for (int j = 0; j < m; ++j) fit.coefficients.push_back(beta(j));
    fit.intercept = beta(m);
    fit.sse = sse;
    fit.r2 = 1.0 - sse / sst;
    fit.adjusted_r2 = adjusted_r2(fit.r2, n, m);
    if (1.0 - fit.r2 <= 1e-15) {
        fit.p_value = 0.0;
    } else {
        const double f = (fit.r2 / m) / ((1.0 - fit.r2) / (n - m - 1));
        const boost::math::fisher_f_distribution<double> dist(m, n - m - 1);
        fit.p_value = boost::math::cdf(boost::math::complement(dist, std::max(0.0, f)));
    }
    return fit;
}

double linear_predict(const LinearFit& fit, const FeatureVector& f) {
    double y = fit.intercept;
    for (std::size_t j = 0; j < fit.feature_names.size(); ++j) {
        y += fit.coefficients[j] * feature_value(f, fit.feature_names[j]);
    }
    return y;
}

std::vector<double> vif(const Dataset& ds) {
    const int m = static_cast<int>(ds.feature_names.size());
    if (m < 2) throw ConfigError("collinearity diagnostics need at least 2 features");
    if (ds.samples.size() < 2) throw TooFewSamplesError("collinearity diagnostics need at least 2 samples");
    const int n = static_cast<int>(ds.samples.size());

    std::vector<double> out;
    for (int j = 0; j < m; ++j) {
        std::vector<std::string> others;
        for (int o = 0; o < m; ++o) {
            if (o != j) others.push_back(ds.feature_names[static_cast<std::size_t>(o)]);
        }
        const Eigen::MatrixXd a = design_with_intercept(ds, others);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            y(i) = feature_value(ds.samples[static_cast<std::size_t>(i)].features,
                                 ds.feature_names[static_cast<std::size_t>(j)]);
        }
        const Eigen::VectorXd beta = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(a).solve(y);
        const double sse = (y - a * beta).squaredNorm();
        const double sst = (y.array() - y.mean()).matrix().squaredNorm();
        if (sst <= 0.0) {
            out.push_back(kInf);  // constant column: explained by the intercept alone
        } else {
            out.push_back(vif_from_r2(1.0 - sse / sst));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regression trees

namespace {

struct TreeBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<double>& y;
    int max_depth;  // <= 0: unlimited
    int min_leaf;
    Rng* rng;           // per-node feature subsetting when set
    int max_features;   // only used with rng
    std::vector<TreeNode> nodes;

    int leaf(double value) {
        TreeNode nd;
        nd.value = value;
        nodes.push_back(nd);
        return static_cast<int>(nodes.size()) - 1;
    }

    std::vector<int> candidate_features() {
        const int m = static_cast<int>(x[0].size());
        if (rng == nullptr || max_features >= m) {
            std::vector<int> all(static_cast<std::size_t>(m));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        std::vector<int> pool(static_cast<std::size_t>(m));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < max_features; ++i) {
            const auto j = static_cast<std::size_t>(rng->uniform_int(i, m - 1));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        }
        pool.resize(static_cast<std::size_t>(max_features));
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    int build(const std::vector<int>& idx, int depth) {
        const int n = static_cast<int>(idx.size());
        double sum = 0.0, lo = y[static_cast<std::size_t>(idx[0])], hi = lo;
        for (int i : idx) {
            const double v = y[static_cast<std::size_t>(i)];
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double node_mean = sum / n;
        if (n < 2 * min_leaf || lo == hi || (max_depth > 0 && depth >= max_depth)) {
            return leaf(node_mean);
        }

        // best split: ascending feature then ascending threshold with a strict
        // comparison keeps ties on the lowest feature index / lowest threshold
        int best_feature = -1;
        double best_threshold = 0.0, best_sse = kInf;
        std::vector<std::pair<double, double>> vals(static_cast<std::size_t>(n));
        for (int f : candidate_features()) {
            for (int i = 0; i < n; ++i) {
                const auto row = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
                vals[static_cast<std::size_t>(i)] = {x[row][static_cast<std::size_t>(f)], y[row]};
            }
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double ls = 0.0, ls2 = 0.0;
            double rs = 0.0, rs2 = 0.0;
            for (const auto& [xv, yv] : vals) {
                rs += yv;
                rs2 += yv * yv;
            }
            for (int s = 1; s < n; ++s) {
                const double yv = vals[static_cast<std::size_t>(s - 1)].second;
                ls += yv;
                ls2 += yv * yv;
                rs -= yv;
                rs2 -= yv * yv;
                if (vals[static_cast<std::size_t>(s - 1)].first ==
                    vals[static_cast<std::size_t>(s)].first) {
                    continue;  // no threshold separates equal values
                }
                if (s < min_leaf || n - s < min_leaf) continue;
                const double sse = (ls2 - ls * ls / s) + (rs2 - rs * rs / (n - s));
                if (sse < best_sse) {
                    best_sse = sse;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[static_cast<std::size_t>(s - 1)].first +
                                            vals[static_cast<std::size_t>(s)].first);
                }
            }
        }
        if (best_feature < 0) return leaf(node_mean);

        std::vector<int> left_idx, right_idx;
        for (int i : idx) {
            const double v = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_feature)];
            (v <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        const int node = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(node)].feature = best_feature;
        nodes[static_cast<std::size_t>(node)].threshold = best_threshold;
        const int l = build(left_idx, depth + 1);
        const int r = build(right_idx, depth + 1);
        nodes[static_cast<std::size_t>(node)].left = l;
        nodes[static_cast<std::size_t>(node)].right = r;
        return node;
    }
};

RegressionTree fit_tree_on(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                           const std::vector<int>& idx, int max_depth, int min_leaf, Rng* rng,
                           int max_features) {
    TreeBuilder b{x, y, max_depth, min_leaf, rng, max_features, {}};
    b.build(idx, 0);
    RegressionTree t;
    t.nodes = std::move(b.nodes);
    return t;
}

}  // namespace

RegressionTree fit_regression_tree(const std::vector<std::vector<double>>& x,
                                   const std::vector<double>& y, int max_depth, int min_leaf) {
    if (x.empty() || x.size() != y.size()) throw ShapeMismatchError("rows and labels disagree");
    if (x[0].empty()) throw ShapeMismatchError("rows have no features");
    if (min_leaf < 1) throw InvalidHyperparameterError("min_leaf must be at least 1");
    std::vector<int> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    return fit_tree_on(x, y, idx, max_depth, min_leaf, nullptr, 0);
}

double tree_predict(const RegressionTree& tree, const std::vector<double>& x) {
    int i = 0;
    while (tree.nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& nd = tree.nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<std::size_t>(i)].value;
}

namespace {

int depth_below(const RegressionTree& t, int node) {
    const auto& nd = t.nodes[static_cast<std::size_t>(node)];
    if (nd.feature < 0) return 0;
    return 1 + std::max(depth_below(t, nd.left), depth_below(t, nd.right));
}

}  // namespace

int tree_depth(const RegressionTree& tree) { return depth_below(tree, 0); }

// ---------------------------------------------------------------------------
// Ensembles

GbtModel gbt_fit(const Dataset& train, const GbtConfig& cfg) {
    if (train.samples.empty()) throw TooFewSamplesError("training set is empty");
    check_feature_subset(train.feature_names);
    if (cfg.n_estimators < 1) throw InvalidHyperparameterError("n_estimators must be at least 1");
    if (cfg.max_depth < 1) throw InvalidHyperparameterError("max_depth must be at least 1");
    if (!(cfg.learning_rate > 0.0)) throw InvalidHyperparameterError("learning_rate must be positive");
    if (cfg.min_leaf < 1) throw InvalidHyperparameterError("min_leaf must be at least 1");

    const auto x = design_matrix(train);
    const auto y = labels(train);
    const int n = static_cast<int>(y.size());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);

    GbtModel model;
    model.feature_names = train.feature_names;
    model.config = cfg;
    model.initial = mean_of(y);

    std::vector<double> current(y.size(), model.initial);
    std::vector<double> residual(y.size());
    for (int t = 0; t < cfg.n_estimators; ++t) {
        for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - current[i];
        auto tree = fit_tree_on(x, residual, idx, cfg.max_depth, cfg.min_leaf, nullptr, 0);
        for (std::size_t i = 0; i < y.size(); ++i) {
            current[i] += cfg.learning_rate * tree_predict(tree, x[i]);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

namespace {

std::vector<double> named_row(const std::vector<std::string>& names, const FeatureVector& f) {
    std::vector<double> x;
    x.reserve(names.size());
    for (const auto& n : names) x.push_back(feature_value(f, n));
    return x;
}

}  // namespace

double gbt_predict(const GbtModel& model, const FeatureVector& f) {
    const auto x = named_row(model.feature_names, f);
    double y = model.initial;
    for (const auto& tree : model.trees) y += model.config.learning_rate * tree_predict(tree, x);
    return y;
}

std::vector<double> gbt_staged_mse(const GbtModel& model, const Dataset& train) {
    const auto x = design_matrix(train);
    const auto y = labels(train);
    if (train.feature_names != model.feature_names) {
        throw ShapeMismatchError("model features do not match the dataset");
    }
    std::vector<double> current(y.size(), model.initial);
    std::vector<double> out;
    const auto mse_now = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            s += (y[i] - current[i]) * (y[i] - current[i]);
        }
        return s / static_cast<double>(y.size());
    };
    out.push_back(mse_now());
    for (const auto& tree : model.trees) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            current[i] += model.config.learning_rate * tree_predict(tree, x[i]);
        }
        out.push_back(mse_now());
    }
    return out;
}

RfModel rf_fit(const Dataset& train, const RfConfig& cfg) {
    if (train.samples.empty()) throw TooFewSamplesError("training set is empty");
    check_feature_subset(train.feature_names);
    if (cfg.n_estimators < 1) throw InvalidHyperparameterError("n_estimators must be at least 1");
    if (cfg.max_depth < 0) throw InvalidHyperparameterError("max_depth must be nonnegative");
    if (cfg.min_leaf < 1) throw InvalidHyperparameterError("min_leaf must be at least 1");

    const auto x = design_matrix(train);
    const auto y = labels(train);
    const int n = static_cast<int>(y.size());
    const int m = static_cast<int>(train.feature_names.size());
    const int max_features = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));

    RfModel model;
    model.feature_names = train.feature_names;
    model.config = cfg;
    for (int t = 0; t < cfg.n_estimators; ++t) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        std::vector<int> idx(static_cast<std::size_t>(n));
        if (cfg.bootstrap) {
            for (auto& i : idx) i = static_cast<int>(rng.uniform_int(0, n - 1));
        } else {
            std::iota(idx.begin(), idx.end(), 0);
        }
        model.trees.push_back(
            fit_tree_on(x, y, idx, cfg.max_depth, cfg.min_leaf, &rng, max_features));
    }
    return model;
}

double rf_predict(const RfModel& model, const FeatureVector& f) {
    const auto x = named_row(model.feature_names, f);
    double s = 0.0;
    for (const auto& tree : model.trees) s += tree_predict(tree, x);
    return s / static_cast<double>(model.trees.size());
}

// ---------------------------------------------------------------------------
// Metrics and cross-validation

MetricsReport metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.empty() || y.size() != yhat.size()) {
        throw ShapeMismatchError("labels and predictions must have equal nonzero length");
    }
    const double n = static_cast<double>(y.size());
    MetricsReport r;
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        se += d * d;
        ae += std::abs(d);
    }
    r.mse = se / n;
    r.rmse = std::sqrt(r.mse);
    r.mae = ae / n;

    const double ybar = mean_of(y);
    const double hbar = mean_of(yhat);
    double sst = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sst += (y[i] - ybar) * (y[i] - ybar);
        sxy += (y[i] - ybar) * (yhat[i] - hbar);
    }
    if (sst <= 0.0) throw ConstantLabelsError("labels are constant");
    r.r2 = 1.0 - se / sst;
    r.slope = sxy / sst;
    r.intercept = hbar - r.slope * ybar;
    return r;
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::kMean: return "mean";
        case ModelKind::kLinear: return "linear";
        case ModelKind::kRf: return "rf";
        case ModelKind::kGbt: return "gbt";
    }
    throw ConfigError("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "mean") return ModelKind::kMean;
    if (name == "linear") return ModelKind::kLinear;
    if (name == "rf") return ModelKind::kRf;
    if (name == "gbt") return ModelKind::kGbt;
    throw ConfigError("unknown model kind: " + name);
}

TrainedModel train_model(const Dataset& train, const ModelSpec& spec) {
    if (train.samples.empty()) throw TooFewSamplesError("training set is empty");
    TrainedModel model;
    model.kind = spec.kind;
    model.feature_names = train.feature_names;
    if (spec.kind == ModelKind::kMean) {
        model.mean_value = mean_of(labels(train));
        return model;
    }
    model.scaler = zscore_fit(train);
    const Dataset scaled = zscore_apply(model.scaler, train);
    switch (spec.kind) {
        case ModelKind::kLinear:
            model.linear = ols_fit(scaled, scaled.feature_names);
            break;
        case ModelKind::kRf:
            model.rf = rf_fit(scaled, spec.rf);
            break;
        case ModelKind::kGbt:
            model.gbt = gbt_fit(scaled, spec.gbt);
            break;
        case ModelKind::kMean:
            break;
    }
    return model;
}

double predict(const TrainedModel& model, const FeatureVector& f) {
    if (model.kind == ModelKind::kMean) return model.mean_value;
    const FeatureVector scaled = scale_features(model.scaler, f);
    switch (model.kind) {
        case ModelKind::kLinear: return linear_predict(model.linear, scaled);
        case ModelKind::kRf: return rf_predict(model.rf, scaled);
        case ModelKind::kGbt: return gbt_predict(model.gbt, scaled);
        case ModelKind::kMean: break;
    }
    return model.mean_value;
}

std::vector<int> kfold_assignment(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw TooFewSamplesError("need at least 2 folds");
    if (ds.samples.size() < static_cast<std::size_t>(k)) {
        throw TooFewSamplesError("fewer samples than folds");
    }
    std::vector<int> fold(ds.samples.size(), -1);
    // stratum-balanced deal; the running counter keeps every fold nonempty
    int counter = 0;
    for (auto& [name, members] : strata_by_id(ds)) {
        Rng rng(mix_seed(seed, fnv1a(name)));
        rng.shuffle(members);
        for (int i : members) fold[static_cast<std::size_t>(i)] = counter++ % k;
    }
    return fold;
}

namespace {

// Like metrics(), but a fold whose labels are constant (leave-one-out being
// the usual case) gets NaN for the variance-based statistics instead of a
// throw; the error averages are always well defined.
MetricsReport fold_metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
    try {
        return metrics(y, yhat);
    } catch (const ConstantLabelsError&) {
        MetricsReport r;
        const double n = static_cast<double>(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            r.mse += (y[i] - yhat[i]) * (y[i] - yhat[i]) / n;
            r.mae += std::abs(y[i] - yhat[i]) / n;
        }
        r.rmse = std::sqrt(r.mse);
        r.r2 = r.slope = r.intercept = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
}

}  // namespace

CvReport kfold_cv(const Dataset& ds, int k, const ModelSpec& spec, std::uint64_t seed) {
    const auto fold = kfold_assignment(ds, k, seed);
    CvReport report;
    report.k = k;
    for (int f = 0; f < k; ++f) {
        Dataset train, val;
        train.feature_names = val.feature_names = ds.feature_names;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            (fold[i] == f ? val : train).samples.push_back(ds.samples[i]);
        }
        const TrainedModel model = train_model(train, spec);
        std::vector<double> yhat;
        yhat.reserve(val.samples.size());
        for (const auto& s : val.samples) yhat.push_back(predict(model, s.features));
        report.folds.push_back(fold_metrics(labels(val), yhat));
    }
    const double kd = static_cast<double>(k);
    int defined = 0;
    for (const auto& r : report.folds) {
        report.mean_mse += r.mse / kd;
        report.mean_rmse += r.rmse / kd;
        report.mean_mae += r.mae / kd;
        if (std::isfinite(r.r2)) {
            ++defined;
            report.mean_r2 += r.r2;
            report.mean_slope += r.slope;
            report.mean_intercept += r.intercept;
        }
    }
    if (defined > 0) {
        report.mean_r2 /= defined;
        report.mean_slope /= defined;
        report.mean_intercept /= defined;
    } else {
        report.mean_r2 = report.mean_slope = report.mean_intercept =
            std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

double parse_double_field(const std::string& field, int line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        throw ParseError("bad numeric field '" + field + "' at line " + std::to_string(line));
    }
    if (used != field.size() || !std::isfinite(v)) {
        throw ParseError("bad numeric field '" + field + "' at line " + std::to_string(line));
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

constexpr const char* kDatasetHeader = "id,mixture,p,d,k,mtd";

}  // namespace

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty dataset file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kDatasetHeader) {
        throw ParseError("expected header '" + std::string(kDatasetHeader) + "' in " + path);
    }
    Dataset ds;
    ds.feature_names = {"p", "d", "k"};
    std::set<std::string> ids;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 6) {
            throw ParseError("expected 6 fields at line " + std::to_string(line_no));
        }
        LabeledSample s;
        s.id = fields[0];
        s.mixture = fields[1];
        s.features.p = parse_double_field(fields[2], line_no);
        s.features.d = parse_double_field(fields[3], line_no);
        s.features.k = parse_double_field(fields[4], line_no);
        s.mtd = parse_double_field(fields[5], line_no);
        if (s.id.empty()) throw ParseError("empty id at line " + std::to_string(line_no));
        if (!ids.insert(s.id).second) {
            throw ParseError("duplicate id '" + s.id + "' at line " + std::to_string(line_no));
        }
        if (!(s.mtd > 0.0)) {
            throw ParseError("mtd must be positive at line " + std::to_string(line_no));
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << kDatasetHeader << "\n";
    char buf[96];
    for (const auto& s : ds.samples) {
        if (s.id.find(',') != std::string::npos || s.mixture.find(',') != std::string::npos) {
            throw Error("ids and mixtures must not contain commas");
        }
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", s.features.p, s.features.d,
                      s.features.k, s.mtd);
        out << s.id << ',' << s.mixture << ',' << buf << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

namespace {

nlohmann::json node_to_json(const RegressionTree& t, int i) {
    const auto& nd = t.nodes[static_cast<std::size_t>(i)];
    if (nd.feature < 0) return nlohmann::json{{"value", nd.value}};
    return nlohmann::json{{"feature", nd.feature},
                          {"threshold", nd.threshold},
                          {"left", node_to_json(t, nd.left)},
                          {"right", node_to_json(t, nd.right)}};
}

int node_from_json(const nlohmann::json& j, RegressionTree& t) {
    const int at = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (j.contains("value")) {
        t.nodes[static_cast<std::size_t>(at)].value = j.at("value").get<double>();
        return at;
    }
    t.nodes[static_cast<std::size_t>(at)].feature = j.at("feature").get<int>();
    t.nodes[static_cast<std::size_t>(at)].threshold = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), t);
    const int r = node_from_json(j.at("right"), t);
    t.nodes[static_cast<std::size_t>(at)].left = l;
    t.nodes[static_cast<std::size_t>(at)].right = r;
    return at;
}

nlohmann::json tree_to_json(const RegressionTree& t) { return node_to_json(t, 0); }

RegressionTree tree_from_json(const nlohmann::json& j) {
    RegressionTree t;
    node_from_json(j, t);
    return t;
}

nlohmann::json scaler_to_json(const Scaler& sc) {
    return {{"feature_names", sc.feature_names}, {"mean", sc.mean}, {"std_dev", sc.std_dev}};
}

Scaler scaler_from_json(const nlohmann::json& j) {
    Scaler sc;
    sc.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    sc.mean = j.at("mean").get<std::vector<double>>();
    sc.std_dev = j.at("std_dev").get<std::vector<double>>();
    if (sc.mean.size() != sc.feature_names.size() || sc.std_dev.size() != sc.feature_names.size()) {
        throw ParseError("scaler arrays disagree in length");
    }
    return sc;
}

}  // namespace

nlohmann::json model_to_json(const TrainedModel& model) {
    nlohmann::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["kind"] = model_kind_name(model.kind);
    j["feature_names"] = model.feature_names;
    switch (model.kind) {
        case ModelKind::kMean:
            j["mean_value"] = model.mean_value;
            break;
        case ModelKind::kLinear:
            j["scaler"] = scaler_to_json(model.scaler);
            j["linear"] = {{"feature_names", model.linear.feature_names},
                           {"coefficients", model.linear.coefficients},
                           {"intercept", model.linear.intercept},
                           {"sse", model.linear.sse},
                           {"r2", model.linear.r2},
                           {"adjusted_r2", model.linear.adjusted_r2},
                           {"p_value", model.linear.p_value}};
            break;
        case ModelKind::kGbt: {
            j["scaler"] = scaler_to_json(model.scaler);
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& t : model.gbt.trees) trees.push_back(tree_to_json(t));
            j["gbt"] = {{"n_estimators", model.gbt.config.n_estimators},
                        {"max_depth", model.gbt.config.max_depth},
                        {"learning_rate", model.gbt.config.learning_rate},
                        {"min_leaf", model.gbt.config.min_leaf},
                        {"seed", model.gbt.config.seed},
                        {"initial", model.gbt.initial},
                        {"trees", std::move(trees)}};
            break;
        }
        case ModelKind::kRf: {
            j["scaler"] = scaler_to_json(model.scaler);
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& t : model.rf.trees) trees.push_back(tree_to_json(t));
            j["rf"] = {{"n_estimators", model.rf.config.n_estimators},
                       {"max_depth", model.rf.config.max_depth},
                       {"min_leaf", model.rf.config.min_leaf},
                       {"bootstrap", model.rf.config.bootstrap},
                       {"seed", model.rf.config.seed},
                       {"trees", std::move(trees)}};
            break;
        }
    }
    return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kModelSchemaVersion) {
            throw VersionMismatchError("unsupported model schema version " +
                                       std::to_string(version));
        }
        TrainedModel model;
        model.kind = model_kind_from_name(j.at("kind").get<std::string>());
        model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        switch (model.kind) {
            case ModelKind::kMean:
                model.mean_value = j.at("mean_value").get<double>();
                break;
            case ModelKind::kLinear: {
                model.scaler = scaler_from_json(j.at("scaler"));
                const auto& lin = j.at("linear");
                model.linear.feature_names =
                    lin.at("feature_names").get<std::vector<std::string>>();
                model.linear.coefficients = lin.at("coefficients").get<std::vector<double>>();
                model.linear.intercept = lin.at("intercept").get<double>();
                model.linear.sse = lin.at("sse").get<double>();
                model.linear.r2 = lin.at("r2").get<double>();
                model.linear.adjusted_r2 = lin.at("adjusted_r2").get<double>();
                model.linear.p_value = lin.at("p_value").get<double>();
                break;
            }
            case ModelKind::kGbt: {
                model.scaler = scaler_from_json(j.at("scaler"));
                const auto& g = j.at("gbt");
                model.gbt.feature_names = model.feature_names;
                model.gbt.config.n_estimators = g.at("n_estimators").get<int>();
                model.gbt.config.max_depth = g.at("max_depth").get<int>();
                model.gbt.config.learning_rate = g.at("learning_rate").get<double>();
                model.gbt.config.min_leaf = g.at("min_leaf").get<int>();
                model.gbt.config.seed = g.at("seed").get<std::uint64_t>();
                model.gbt.initial = g.at("initial").get<double>();
                for (const auto& t : g.at("trees")) model.gbt.trees.push_back(tree_from_json(t));
                break;
            }
            case ModelKind::kRf: {
                model.scaler = scaler_from_json(j.at("scaler"));
                const auto& rf = j.at("rf");
                model.rf.feature_names = model.feature_names;
                model.rf.config.n_estimators = rf.at("n_estimators").get<int>();
                model.rf.config.max_depth = rf.at("max_depth").get<int>();
                model.rf.config.min_leaf = rf.at("min_leaf").get<int>();
                model.rf.config.bootstrap = rf.at("bootstrap").get<bool>();
                model.rf.config.seed = rf.at("seed").get<std::uint64_t>();
                for (const auto& t : rf.at("trees")) model.rf.trees.push_back(tree_from_json(t));
                break;
            }
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model artifact: ") + e.what());
    }
}

void save_model_json(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << model_to_json(model).dump(2) << "\n";
    if (!out) throw IoError("short write to " + path);
}

TrainedModel load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model artifact: ") + e.what());
    }
    return model_from_json(j);
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
    return {{"mse", report.mse},     {"rmse", report.rmse},
            {"mae", report.mae},     {"r2", report.r2},
            {"slope", report.slope}, {"intercept", report.intercept}};
}

nlohmann::json cv_report_to_json(const CvReport& report) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& r : report.folds) folds.push_back(metrics_to_json(r));
    return {{"k", report.k},
            {"folds", std::move(folds)},
            {"mean", {{"mse", report.mean_mse},
                      {"rmse", report.mean_rmse},
                      {"mae", report.mean_mae},
                      {"r2", report.mean_r2},
                      {"slope", report.mean_slope},
                      {"intercept", report.mean_intercept}}}};
}

nlohmann::json linear_fit_to_json(const LinearFit& fit) {
    return {{"feature_names", fit.feature_names},
            {"coefficients", fit.coefficients},
            {"intercept", fit.intercept},
            {"sse", fit.sse},
            {"r2", fit.r2},
            {"adjusted_r2", fit.adjusted_r2},
            {"p_value", fit.p_value}};
}

}  // namespace pavetex
