#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pavetex/features.hpp"

namespace pavetex {

struct LabeledSample {
    std::string id;
    std::string mixture;
    FeatureVector features;
    double mtd = 0.0;  // mm
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<std::string> feature_names;  // ordered subset of {"p","d","k"}

    std::size_t size() const { return samples.size(); }
};

double feature_value(const FeatureVector& f, const std::string& name);

// Row-major design matrix of ds.feature_names, one row per sample.
std::vector<std::vector<double>> design_matrix(const Dataset& ds);
std::vector<double> labels(const Dataset& ds);

// ---------------------------------------------------------------------------
// Scaling and splitting

struct Scaler {
    std::vector<std::string> feature_names;
    std::vector<double> mean;
    std::vector<double> std_dev;  // population standard deviation
};

Scaler zscore_fit(const Dataset& train);
Dataset zscore_apply(const Scaler& scaler, const Dataset& ds);

// Per-stratum holdout counts are round(fraction * stratum size). Membership
// depends only on the sample ids and the seed, not on input order.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double holdout_fraction,
                                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Linear diagnostics

struct LinearFit {
    std::vector<std::string> feature_names;
    std::vector<double> coefficients;
    double intercept = 0.0;
    double sse = 0.0;
    double r2 = 0.0;
    double adjusted_r2 = 0.0;
    double p_value = 1.0;  // overall F-test
};

LinearFit ols_fit(const Dataset& ds, const std::vector<std::string>& feature_subset);
double linear_predict(const LinearFit& fit, const FeatureVector& f);

double adjusted_r2(double r2, int n, int m);
double vif_from_r2(double r2);

// One value per dataset feature; +inf marks perfect collinearity.
std::vector<double> vif(const Dataset& ds);

// ---------------------------------------------------------------------------
// Regression trees and ensembles

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

// Exact CART with squared-error loss: thresholds are midpoints between
// consecutive sorted unique values, rows with x <= threshold go left, ties
// break on the lowest feature index then the lowest threshold.
// max_depth <= 0 grows to purity.
RegressionTree fit_regression_tree(const std::vector<std::vector<double>>& x,
                                   const std::vector<double>& y, int max_depth, int min_leaf = 1);
double tree_predict(const RegressionTree& tree, const std::vector<double>& x);
int tree_depth(const RegressionTree& tree);

struct GbtConfig {
    int n_estimators = 60;
    int max_depth = 5;
    double learning_rate = 0.1;
    int min_leaf = 1;
    std::uint64_t seed = 0;
};

struct GbtModel {
    std::vector<std::string> feature_names;
    GbtConfig config;
    double initial = 0.0;  // mean of the training labels
    std::vector<RegressionTree> trees;
};

GbtModel gbt_fit(const Dataset& train, const GbtConfig& cfg = {});
double gbt_predict(const GbtModel& model, const FeatureVector& f);
// Training MSE after each boosting stage (stage 0 = the constant model).
std::vector<double> gbt_staged_mse(const GbtModel& model, const Dataset& train);

struct RfConfig {
    int n_estimators = 60;
    int max_depth = 0;  // 0 grows to purity
    int min_leaf = 1;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct RfModel {
    std::vector<std::string> feature_names;
    RfConfig config;
    std::vector<RegressionTree> trees;
};

RfModel rf_fit(const Dataset& train, const RfConfig& cfg = {});
double rf_predict(const RfModel& model, const FeatureVector& f);

// ---------------------------------------------------------------------------
// Metrics and cross-validation

struct MetricsReport {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    // OLS line of predictions against labels; ideal is slope 1, intercept 0.
    double slope = 0.0;
    double intercept = 0.0;
};

MetricsReport metrics(const std::vector<double>& y, const std::vector<double>& yhat);

enum class ModelKind { kMean, kLinear, kRf, kGbt };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct ModelSpec {
    ModelKind kind = ModelKind::kGbt;
    GbtConfig gbt;
    RfConfig rf;
};

// A fitted model plus the scaler that conditions its inputs.
struct TrainedModel {
    ModelKind kind = ModelKind::kLinear;
    std::vector<std::string> feature_names;
    Scaler scaler;  // empty feature list for the mean model
    double mean_value = 0.0;
    LinearFit linear;
    GbtModel gbt;
    RfModel rf;
};

TrainedModel train_model(const Dataset& train, const ModelSpec& spec);
double predict(const TrainedModel& model, const FeatureVector& f);

struct CvReport {
    int k = 0;
    std::vector<MetricsReport> folds;
    double mean_mse = 0.0;
    double mean_rmse = 0.0;
    double mean_mae = 0.0;
    double mean_r2 = 0.0;
    double mean_slope = 0.0;
    double mean_intercept = 0.0;
};

// Stratified fold assignment, a pure function of (ids, seed); the scaler is
// refit on each training partition. Folds with constant labels (single-sample
// folds under leave-one-out) report NaN r2/slope/intercept, and the means of
// those statistics run over the folds where they are defined.
CvReport kfold_cv(const Dataset& ds, int k, const ModelSpec& spec, std::uint64_t seed);
std::vector<int> kfold_assignment(const Dataset& ds, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization

Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& ds, const std::string& path);

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model_json(const TrainedModel& model, const std::string& path);
TrainedModel load_model_json(const std::string& path);

nlohmann::json metrics_to_json(const MetricsReport& report);
nlohmann::json cv_report_to_json(const CvReport& report);
nlohmann::json linear_fit_to_json(const LinearFit& fit);

}  // namespace pavetex
