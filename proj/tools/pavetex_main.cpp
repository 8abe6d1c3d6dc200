// pavetex: depth maps in, texture features and MTD predictions out.
//
// Subcommands: features, train, cv, predict, synth, filter-eval. A JSON
// config file supplies pipeline settings; explicit flags win over the file.
// Exit codes: 0 all outputs written, 1 data/processing error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pavetex/denoise.hpp"
#include "pavetex/errors.hpp"
#include "pavetex/features.hpp"
#include "pavetex/grid_io.hpp"
#include "pavetex/pipeline.hpp"
#include "pavetex/regress.hpp"
#include "pavetex/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pavetex;

namespace {

constexpr int kReportSchemaVersion = 1;

// Thrown for bad invocations (unknown subset, bad model name, ...): exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config file " + path + ": " + e.what());
    }
    return pipeline_config_from_json(j);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

void write_report(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string map_id(const std::string& path) { return fs::path(path).stem().string(); }

bool is_map_file(const fs::path& p) {
    return p.extension() == ".pfm" || p.extension() == ".csv";
}

// Files straight through; directories expand to their map files sorted by name.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<std::string> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto& entry : fs::directory_iterator(in)) {
                if (entry.is_regular_file() && is_map_file(entry.path())) {
                    found.push_back(entry.path().string());
                }
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(in);
        }
    }
    return out;
}

// The four supported feature subsets, written like "p+d" (case-insensitive).
std::vector<std::string> parse_feature_subset(std::string arg) {
    std::transform(arg.begin(), arg.end(), arg.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::vector<std::string> names;
    std::string cur;
    for (char c : arg + "+") {
        if (c == '+') {
            names.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    static const std::vector<std::vector<std::string>> allowed = {
        {"p", "k"}, {"p", "d"}, {"k", "d"}, {"p", "d", "k"}};
    for (const auto& ok : allowed) {
        if (names == ok) return names;
    }
    throw UsageError("unknown feature subset '" + arg + "' (use p+k, p+d, k+d, or p+d+k)");
}

ModelKind parse_model_kind(const std::string& name) {
    try {
        return model_kind_from_name(name);
    } catch (const ConfigError&) {
        throw UsageError("unknown model '" + name + "' (use mean, linear, rf, or gbt)");
    }
}

Dataset project_features(const Dataset& ds, const std::vector<std::string>& subset) {
    Dataset out = ds;
    out.feature_names = subset;
    return out;
}

// ---------------------------------------------------------------------------
// features

struct FeaturesArgs {
    std::vector<std::string> inputs;
    std::string config;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool emit_intermediates = false;
};

int run_features(const FeaturesArgs& args) {
    PipelineConfig cfg = load_config(args.config);
    if (args.seed_set) cfg.seed = args.seed;
    const auto files = expand_inputs(args.inputs);
    if (files.empty()) throw UsageError("no input maps given");
    fs::create_directories(args.out_dir);

    std::string csv = "id,p,d,k\n";
    for (const auto& file : files) {
        const std::string id = map_id(file);
        DepthMap map;
        try {
            map = read_depth_map(file);
        } catch (const Error& e) {
            std::fprintf(stderr, "pavetex features: %s: read: %s\n", file.c_str(), e.what());
            return 1;
        }
        ConditionedMap cm;
        try {
            cm = condition_map(map, cfg);
        } catch (const Error& e) {
            std::fprintf(stderr, "pavetex features: %s: conditioning: %s\n", file.c_str(),
                         e.what());
            return 1;
        }
        FeatureVector fv;
        BinaryMask concave, binarized;
        ParticleSet particles;
        try {
            fv = extract_features(cm.conditioned, cfg.features);
            if (args.emit_intermediates) {
                concave = threshold_segment(cm.conditioned, cfg.features.threshold);
                binarized = local_adaptive_binarize(cm.conditioned, cfg.features.binarize);
                particles = watershed_split(binarized, cfg.features.watershed);
            }
        } catch (const Error& e) {
            std::fprintf(stderr, "pavetex features: %s: segmentation: %s\n", file.c_str(),
                         e.what());
            return 1;
        }
        if (args.emit_intermediates) {
            const fs::path base = fs::path(args.out_dir) / id;
            write_depth_map(cm.filtered, base.string() + ".filtered.pfm");
            write_depth_map(cm.corrected, base.string() + ".corrected.pfm");
            write_mask_pgm(concave, base.string() + ".concave.pgm");
            write_mask_pgm(binarized, base.string() + ".particles.pgm");
            write_particles_csv(particles, base.string() + ".particles.csv");
        }
        csv += id + "," + fmt17(fv.p) + "," + fmt17(fv.d) + "," + fmt17(fv.k) + "\n";
    }
    write_text(fs::path(args.out_dir) / "features.csv", csv);
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string dataset;
    std::string subset = "p+d+k";
    std::string model = "gbt";
    double holdout = 0.25;
    std::string config;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

json prediction_rows(const TrainedModel& model, const Dataset& ds, const char* split) {
    json rows = json::array();
    for (const auto& s : ds.samples) {
        rows.push_back({{"id", s.id},
                        {"split", split},
                        {"mtd", s.mtd},
                        {"predicted", predict(model, s.features)}});
    }
    return rows;
}

MetricsReport eval_split(const TrainedModel& model, const Dataset& ds) {
    std::vector<double> yhat;
    yhat.reserve(ds.samples.size());
    for (const auto& s : ds.samples) yhat.push_back(predict(model, s.features));
    return metrics(labels(ds), yhat);
}

int run_train(const TrainArgs& args) {
    const auto subset = parse_feature_subset(args.subset);
    PipelineConfig cfg = load_config(args.config);
    cfg.model.kind = parse_model_kind(args.model);
    if (args.seed_set) {
        cfg.seed = args.seed;
        cfg.model.gbt.seed = cfg.model.rf.seed = args.seed;
    }
    if (args.holdout < 0.0 || args.holdout >= 1.0) {
        throw UsageError("holdout fraction must be in [0, 1)");
    }

    const Dataset full = project_features(read_dataset_csv(args.dataset), subset);
    auto [train, holdout] = stratified_split(full, args.holdout, cfg.seed);
    const TrainedModel model = train_model(train, cfg.model);

    json report{{"schema_version", kReportSchemaVersion},
                {"model", model_kind_name(cfg.model.kind)},
                {"features", subset},
                {"holdout_fraction", args.holdout},
                {"seed", cfg.seed},
                {"n_train", train.samples.size()},
                {"n_holdout", holdout.samples.size()}};
    report["train_metrics"] = metrics_to_json(eval_split(model, train));
    if (holdout.samples.size() >= 2) {
        report["holdout_metrics"] = metrics_to_json(eval_split(model, holdout));
    }
    json rows = prediction_rows(model, train, "train");
    for (auto& r : prediction_rows(model, holdout, "holdout")) rows.push_back(std::move(r));
    report["predictions"] = std::move(rows);

    fs::create_directories(args.out_dir);
    save_model_json(model, (fs::path(args.out_dir) / "model.json").string());
    write_report(fs::path(args.out_dir) / "train_report.json", report);
    return 0;
}

// ---------------------------------------------------------------------------
// cv

struct CvArgs {
    std::string dataset;
    int k = 5;
    std::string subset = "p+d+k";
    std::string model = "gbt";
    std::string config;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_cv(const CvArgs& args) {
    const auto subset = parse_feature_subset(args.subset);
    PipelineConfig cfg = load_config(args.config);
    cfg.model.kind = parse_model_kind(args.model);
    if (args.seed_set) {
        cfg.seed = args.seed;
        cfg.model.gbt.seed = cfg.model.rf.seed = args.seed;
    }
    if (args.k < 2) throw UsageError("need at least 2 folds");

    const Dataset ds = project_features(read_dataset_csv(args.dataset), subset);
    const CvReport report = kfold_cv(ds, args.k, cfg.model, cfg.seed);

    json j = cv_report_to_json(report);
    j["schema_version"] = kReportSchemaVersion;
    j["model"] = model_kind_name(cfg.model.kind);
    j["features"] = subset;
    j["seed"] = cfg.seed;
    // flat arrays, one entry per fold, ready for box plots
    json per_fold{{"mse", json::array()}, {"rmse", json::array()},
                  {"mae", json::array()}, {"r2", json::array()}};
    for (const auto& f : report.folds) {
        per_fold["mse"].push_back(f.mse);
        per_fold["rmse"].push_back(f.rmse);
        per_fold["mae"].push_back(f.mae);
        per_fold["r2"].push_back(f.r2);
    }
    j["per_fold"] = std::move(per_fold);

    fs::create_directories(args.out_dir);
    write_report(fs::path(args.out_dir) / "cv_report.json", j);
    return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
    std::string artifact;
    std::vector<std::string> maps;
    std::string rows;
    std::string config;
    std::string out_dir = ".";
};

struct FeatureRow {
    std::string id;
    FeatureVector features;
};

// Accepts any CSV whose header starts with id and names columns from
// {mixture, p, d, k, mtd}; the model decides which feature columns it needs.
std::vector<FeatureRow> read_feature_rows(const std::string& path,
                                          const std::vector<std::string>& required) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature rows: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> cols;
    std::string cur;
    for (char c : line + ",") {
        if (c == ',') {
            cols.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (cols.empty() || cols[0] != "id") throw ParseError(path + ": header must start with id");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 1; i < cols.size(); ++i) index[cols[i]] = i;
    for (const auto& name : required) {
        if (!index.count(name)) {
            throw FeatureMismatchError("model needs feature '" + name + "' but " + path +
                                       " has no such column");
        }
    }

    std::vector<FeatureRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        cur.clear();
        for (char c : line + ",") {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (fields.size() != cols.size()) {
            throw ParseError(path + ": wrong field count at line " + std::to_string(lineno));
        }
        FeatureRow row;
        row.id = fields[0];
        for (const char* name : {"p", "d", "k"}) {
            auto it = index.find(name);
            if (it == index.end()) continue;
            double v = 0.0;
            try {
                std::size_t used = 0;
                v = std::stod(fields[it->second], &used);
                if (used != fields[it->second].size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw ParseError(path + ": bad numeric field at line " + std::to_string(lineno));
            }
            if (name[0] == 'p') row.features.p = v;
            if (name[0] == 'd') row.features.d = v;
            if (name[0] == 'k') row.features.k = v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

int run_predict(const PredictArgs& args) {
    if (args.rows.empty() && args.maps.empty()) {
        throw UsageError("give --rows or at least one map file");
    }
    PipelineConfig cfg = load_config(args.config);
    const TrainedModel model = load_model_json(args.artifact);

    std::vector<FeatureRow> rows;
    if (!args.rows.empty()) {
        rows = read_feature_rows(args.rows, model.feature_names);
    }
    for (const auto& file : expand_inputs(args.maps)) {
        FeatureRow row;
        row.id = map_id(file);
        row.features = run_feature_pipeline(read_depth_map(file), cfg);
        rows.push_back(std::move(row));
    }

    std::string csv = "id,predicted_mtd\n";
    for (const auto& row : rows) {
        csv += row.id + "," + fmt17(predict(model, row.features)) + "\n";
    }
    fs::create_directories(args.out_dir);
    write_text(fs::path(args.out_dir) / "predictions.csv", csv);
    return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::string spec;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_synth(const SynthArgs& args) {
    std::ifstream in(args.spec);
    if (!in) throw IoError("cannot open corpus spec: " + args.spec);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("corpus spec " + args.spec + ": " + e.what());
    }

    int n_samples = 0;
    std::uint64_t seed = 0;
    PipelineConfig pipeline;
    std::vector<SynthFamily> families;
    try {
        n_samples = j.at("n_samples").get<int>();
        seed = j.value("seed", std::uint64_t{0});
        if (j.contains("pipeline")) pipeline = pipeline_config_from_json(j.at("pipeline"));
        for (const auto& f : j.at("families")) {
            SynthFamily fam;
            fam.name = f.at("name").get<std::string>();
            fam.spec = synth_spec_from_json(f);
            families.push_back(std::move(fam));
        }
    } catch (const json::exception& e) {
        throw ParseError("corpus spec " + args.spec + ": " + e.what());
    }
    if (args.seed_set) seed = args.seed;

    std::vector<GroundTruth> truths;
    std::vector<DepthMap> maps;
    const Dataset ds = generate_dataset(n_samples, families, seed, pipeline, &truths, &maps);

    fs::create_directories(args.out_dir);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const fs::path base = fs::path(args.out_dir) / ds.samples[i].id;
        write_depth_map(maps[i], base.string() + ".pfm");
        write_depth_map(truths[i].clean_map, base.string() + ".clean.pfm");
        json sidecar = ground_truth_to_json(truths[i]);
        sidecar["id"] = ds.samples[i].id;
        sidecar["mixture"] = ds.samples[i].mixture;
        write_report(base.string() + ".truth.json", sidecar);
    }
    write_dataset_csv(ds, (fs::path(args.out_dir) / "dataset.csv").string());
    return 0;
}

// ---------------------------------------------------------------------------
// filter-eval

struct FilterEvalArgs {
    std::string map;
    std::string reference;
    std::string config;
    std::string out_dir = ".";
    double sigma_space = 2.0;
    double sigma_range = 0.1;
};

int run_filter_eval(const FilterEvalArgs& args) {
    PipelineConfig cfg = load_config(args.config);
    const DepthMap map = read_depth_map(args.map);
    const DepthMap reference =
        args.reference.empty() ? map : read_depth_map(args.reference);
    const int w = cfg.filter.window;
    const NoiseModel noise = estimate_noise_variance(map);

    json mse{{"mean", filter_mse(reference, mean_filter(map, w))},
             {"median", filter_mse(reference, median_filter(map, w))},
             {"bilateral",
              filter_mse(reference, bilateral_filter(map, w, args.sigma_space, args.sigma_range))},
             {"proposed", filter_mse(reference, adaptive_local_filter(map, cfg.filter, noise))}};
    json report{{"schema_version", kReportSchemaVersion},
                {"window", w},
                {"reference", args.reference.empty() ? "input" : args.reference},
                {"noise_variance", noise.sigma_eta_sq},
                {"mse", std::move(mse)}};

    fs::create_directories(args.out_dir);
    write_report(fs::path(args.out_dir) / "filter_eval.json", report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pavement texture features and mean texture depth prediction"};
    app.require_subcommand(1);

    FeaturesArgs feat;
    auto* feat_cmd = app.add_subcommand("features", "extract P/D/K features from depth maps");
    feat_cmd->add_option("inputs", feat.inputs, "map files (.pfm/.csv) or directories")
        ->required();
    feat_cmd->add_option("--config", feat.config, "pipeline config JSON");
    auto* feat_seed = feat_cmd->add_option("--seed", feat.seed, "override config seed");
    feat_cmd->add_option("--out-dir", feat.out_dir, "output directory");
    feat_cmd->add_flag("--emit-intermediates", feat.emit_intermediates,
                       "write filtered/corrected maps, mask, and particle list per input");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "fit a model on a labeled dataset");
    train_cmd->add_option("dataset", train.dataset, "dataset CSV")->required();
    train_cmd->add_option("--features", train.subset, "feature subset (p+k, p+d, k+d, p+d+k)");
    train_cmd->add_option("--model", train.model, "mean, linear, rf, or gbt");
    train_cmd->add_option("--holdout", train.holdout, "holdout fraction, default 0.25");
    train_cmd->add_option("--config", train.config, "pipeline config JSON");
    auto* train_seed = train_cmd->add_option("--seed", train.seed, "override config seed");
    train_cmd->add_option("--out-dir", train.out_dir, "output directory");

    CvArgs cv;
    auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
    cv_cmd->add_option("dataset", cv.dataset, "dataset CSV")->required();
    cv_cmd->add_option("--k", cv.k, "fold count, default 5");
    cv_cmd->add_option("--features", cv.subset, "feature subset (p+k, p+d, k+d, p+d+k)");
    cv_cmd->add_option("--model", cv.model, "mean, linear, rf, or gbt");
    cv_cmd->add_option("--config", cv.config, "pipeline config JSON");
    auto* cv_seed = cv_cmd->add_option("--seed", cv.seed, "override config seed");
    cv_cmd->add_option("--out-dir", cv.out_dir, "output directory");

    PredictArgs pred;
    auto* pred_cmd = app.add_subcommand("predict", "predict MTD from a trained model");
    pred_cmd->add_option("artifact", pred.artifact, "model JSON artifact")->required();
    pred_cmd->add_option("maps", pred.maps, "map files or directories to featurize");
    pred_cmd->add_option("--rows", pred.rows, "CSV of precomputed feature rows");
    pred_cmd->add_option("--config", pred.config, "pipeline config JSON (map inputs)");
    pred_cmd->add_option("--out-dir", pred.out_dir, "output directory");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    synth_cmd->add_option("spec", synth.spec, "corpus spec JSON")->required();
    auto* synth_seed = synth_cmd->add_option("--seed", synth.seed, "override spec seed");
    synth_cmd->add_option("--out-dir", synth.out_dir, "output directory");

    FilterEvalArgs fe;
    auto* fe_cmd = app.add_subcommand("filter-eval", "compare denoising filters by MSE");
    fe_cmd->add_option("map", fe.map, "input map")->required();
    fe_cmd->add_option("--reference", fe.reference, "clean reference map (default: input)");
    fe_cmd->add_option("--config", fe.config, "pipeline config JSON");
    fe_cmd->add_option("--sigma-space", fe.sigma_space, "bilateral spatial sigma");
    fe_cmd->add_option("--sigma-range", fe.sigma_range, "bilateral range sigma");
    fe_cmd->add_option("--out-dir", fe.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (app.got_subcommand(feat_cmd)) {
            feat.seed_set = feat_seed->count() > 0;
            return run_features(feat);
        }
        if (app.got_subcommand(train_cmd)) {
            train.seed_set = train_seed->count() > 0;
            return run_train(train);
        }
        if (app.got_subcommand(cv_cmd)) {
            cv.seed_set = cv_seed->count() > 0;
            return run_cv(cv);
        }
        if (app.got_subcommand(pred_cmd)) return run_predict(pred);
        if (app.got_subcommand(synth_cmd)) {
            synth.seed_set = synth_seed->count() > 0;
            return run_synth(synth);
        }
        if (app.got_subcommand(fe_cmd)) return run_filter_eval(fe);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "pavetex %s: %s\n", name.c_str(), e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "pavetex %s: %s\n", name.c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pavetex %s: %s\n", name.c_str(), e.what());
        return 1;
    }
    return 2;
}
