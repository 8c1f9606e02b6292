#pragma once

#include "enfo/baselines.hpp"
#include "enfo/datagen.hpp"
#include "enfo/forge.hpp"
#include "enfo/metrics.hpp"
#include "enfo/nu_method.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace enfo {

inline constexpr int kExperimentSchemaVersion = 1;

enum class TaskKind { friedman3, clv, csv };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

/// Where the data comes from. Generated tasks draw n_train + n_test + n_user
/// rows from one seeded stream and cut them in that order; a CSV task is
/// shuffled once and cut into user, test and train rows.
struct TaskConfig {
    TaskKind kind = TaskKind::friedman3;
    Index n_train = 5000;
    Index n_test = 5000;
    /// Held-out real rows playing the data buyer's own data.
    Index n_user = 1000;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
    std::string csv_path;
    double test_fraction = 0.3;
    int clv_covariates = 10;
    int clv_calib_weeks = 32;
    int clv_holdout_weeks = 32;
};

/// Key model settings. Unset bandwidth and iterations are resolved from the
/// training data (median heuristic, cross-validation).
struct KeyConfig {
    double nu = kDefaultNu;
    std::optional<double> bandwidth;
    std::optional<int> iterations;
    CvPlan cv;
};

struct SweepConfig {
    std::vector<int> m{100};
    std::vector<double> lambda{0.0, 0.1, 1.0, 10.0};
    std::vector<double> beta{0.0, 10.0};
};

struct BaselineConfig {
    int krr_folds = 5;
    int svr_iters = 5000;
    double svr_c = 1.0;
    /// Tube width as a fraction of the training target std.
    double svr_epsilon_factor = 0.1;
};

struct PrivacyConfig {
    /// Training rows the forged set is built from (members are drawn here).
    Index pool_size = 500;
    int m = 300;
    /// Balanced: half members, half nonmembers.
    Index candidates = 200;
    double epsilon_percentile = 1.0;
};

struct VelocityConfig {
    int m = 100;
    int pre_epochs = 30;
    int post_epochs = 30;
    /// Relative band around the restart's final RMSE counted as reached.
    double tolerance = 0.02;
    Index scal_small = 1000;
    Index scal_large = 100000;
    int scal_m = 50;
    int scal_batch = 64;
    std::int64_t scal_min_steps = 200;
};

struct ExperimentConfig {
    int schema_version = kExperimentSchemaVersion;
    TaskConfig task;
    KeyConfig key;
    ForgeConfig forge;
    SweepConfig sweeps;
    int repeats = 3;
    Index augmentation_size = 1000;
    BaselineConfig baselines;
    PrivacyConfig privacy;
    VelocityConfig velocity;
    int bins = kDefaultBins;
    std::vector<std::string> sections{"specificity", "augmentation", "privacy", "volume",
                                      "velocity"};
    std::string output_dir = "enfo_out";
};

void validate(const ExperimentConfig& config);
nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys take defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

/// Splits in original units plus the resolved key model settings.
struct PreparedTask {
    Dataset train;
    Dataset test;
    Dataset user;
    Standardization standardization;
    KernelSpec kernel;
    double nu = kDefaultNu;
    int iterations = 1;
    /// Test RMSE (original units) of the key model fitted on all of train.
    double full_data_rmse = 0.0;
    double encapsulate_ms = 0.0;
};

PreparedTask prepare_task(const ExperimentConfig& config);

/// Shared state for the report sections: the prepared task and a cache of
/// forged sets keyed by their forging inputs.
class ExperimentContext {
public:
    explicit ExperimentContext(ExperimentConfig config);
    ExperimentContext(ExperimentConfig config, PreparedTask task);

    const ExperimentConfig& config() const { return config_; }
    const PreparedTask& task() const { return task_; }

    /// Forges on the full training split with config.forge overridden by
    /// (m, lambda, beta, seed). Results are cached.
    const SyntheticDataset& forged(int m, double lambda, double beta, std::uint64_t seed);

    using ForgeKey = std::tuple<int, double, double, std::uint64_t>;
    /// Forges the missing keys across ENFO_THREADS workers.
    void prefetch(const std::vector<ForgeKey>& keys);

    /// Test RMSE in original units of the key model refitted on `data`
    /// (original units).
    double designated_rmse(const Dataset& data) const;
    double krr_rmse(const Dataset& data, std::uint64_t seed) const;
    double svr_rmse(const Dataset& data, std::uint64_t seed) const;

    Dataset to_std(const Dataset& data) const;

private:
    ExperimentConfig config_;
    PreparedTask task_;
    std::map<ForgeKey, SyntheticDataset> cache_;

    SyntheticDataset forge_cell(const ForgeKey& key) const;
};

/// Per-seed repeat seeds: forge.seed, forge.seed + 1, ...
std::vector<std::uint64_t> repeat_seeds(const ExperimentConfig& config);

nlohmann::json run_specificity(ExperimentContext& ctx);
nlohmann::json run_augmentation(ExperimentContext& ctx);
nlohmann::json run_privacy(ExperimentContext& ctx);
nlohmann::json run_volume_sweep(ExperimentContext& ctx);
nlohmann::json run_velocity(ExperimentContext& ctx);
nlohmann::json run_scalability(ExperimentContext& ctx);

/// Runs the configured sections and assembles the report. Curve CSVs are
/// written to config.output_dir when `write_artifacts` is set.
nlohmann::json run_benchmark(const ExperimentConfig& config, bool write_artifacts = true);

/// Serializes with shortest round-trip doubles.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace enfo
