#pragma once

#include "enfo/adam.hpp"
#include "enfo/dataset.hpp"
#include "enfo/kernel.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace enfo {

/// Every knob of the forging stage.
struct ForgeConfig {
    int m = 100;
    int batch_size = 64;
    int epochs = 50;
    double learning_rate = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double lambda_align = 0.0;
    double beta_adapt = 0.0;
    double sinkhorn_blur = 1.0;
    int sinkhorn_iters = 100;
    std::uint64_t seed = 0;
};

void validate(const ForgeConfig& config);
AdamSettings adam_settings(const ForgeConfig& config);

nlohmann::json to_json(const ForgeConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ForgeConfig forge_config_from_json(const nlohmann::json& j);

struct ForgeProvenance {
    std::string source_hash;
    std::string config_hash;
    int epochs_run = 0;
    /// Full-data composite loss of the returned synthetic set.
    double final_loss = 0.0;
    double initial_loss = 0.0;
    /// Epoch whose end-of-epoch snapshot was returned (0 = initialization).
    int best_epoch = 0;
    std::int64_t steps = 0;
    std::int64_t rejected_steps = 0;
    /// Mean wall time of one optimizer iteration (gradient + update).
    double mean_step_ms = 0.0;
    KernelSpec kernel;
    double nu = 5.0;
    int iterations = 1;
    /// Transform between original units and the space forging ran in.
    std::optional<Standardization> standardization;
};

nlohmann::json to_json(const ForgeProvenance& p);
ForgeProvenance forge_provenance_from_json(const nlohmann::json& j);

struct SyntheticDataset {
    Dataset data;
    ForgeProvenance provenance;
};

/// M rows drawn uniformly without replacement, in seeded random order.
SyntheticDataset init_synthetic(const Dataset& data, int m, std::uint64_t seed);

/// Row-major [x_j, y_j] per synthetic row: M*(d+1) entries.
Vector flatten_params(const Dataset& synth);
void unflatten_params(const Vector& params, Dataset& synth);

struct ForgeGradient {
    Matrix features;  // M x d
    Vector target;    // M
};

/// Weights of the optional regularizers in the composite objective.
struct ObjectiveTerms {
    double lambda_align = 0.0;
    double beta_adapt = 0.0;
    double sinkhorn_blur = 1.0;
    int sinkhorn_iters = 100;
};

struct ObjectiveValue {
    double total = 0.0;
    double validation = 0.0;      // mean squared error on the batch
    double alignment = 0.0;       // Sinkhorn divergence (unweighted)
    double training_error = 0.0;  // mean squared fit error on the synthetic rows
    std::optional<ForgeGradient> gradient;
};

/// Composite objective validation + lambda * alignment + beta * training_error
/// of the nu-method refit on `synth`, evaluated against `batch`. With
/// `want_gradient` the gradient is exact through all `iterations` unrolled
/// recursion steps.
ObjectiveValue forge_objective(const Dataset& synth, const Dataset& batch,
                               const KernelSpec& kernel, double nu, int iterations,
                               const ObjectiveTerms& terms, bool want_gradient);

/// Mean squared error on `batch` of the nu-method fitted to `synth`.
double batch_loss(const Dataset& synth, const Dataset& batch, const KernelSpec& kernel,
                  double nu, int iterations);

ForgeGradient forge_gradient(const Dataset& synth, const Dataset& batch,
                             const KernelSpec& kernel, double nu, int iterations);

struct EpochReport {
    int epoch = 0;       // global epoch index, 1-based
    double loss = 0.0;   // full-data composite loss at the end of the epoch
    const Dataset* synthetic = nullptr;  // current state, forging space
};

struct ForgeOptions {
    std::function<void(const EpochReport&)> on_epoch;
    /// In/out optimizer state. Null or empty means a fresh state.
    AdamState* adam_state = nullptr;
    /// Forging space for data given in original units; defaults to the
    /// data's own column statistics.
    const Standardization* standardization = nullptr;
};

/// Mini-batch Adam over the synthetic set through the unrolled nu-method.
/// `data` in original units is standardized internally (options.standardization
/// or its own column statistics); if it already records a transform it is
/// taken as is. The
/// result is in original units. The returned set is the end-of-epoch
/// snapshot (initialization included) with the lowest full-data composite
/// loss, so the loss never exceeds its initial value.
SyntheticDataset forge(const Dataset& data, const KernelSpec& kernel, double nu, int iterations,
                       const ForgeConfig& config, const ForgeOptions& options = {});

/// Continues forging `existing` over old_data ∪ new_data for config.epochs
/// further epochs, in the forging space recorded in its provenance.
SyntheticDataset forge_streaming(const SyntheticDataset& existing, const Dataset& new_data,
                                 const Dataset& old_data, const KernelSpec& kernel, double nu,
                                 int iterations, const ForgeConfig& config,
                                 const ForgeOptions& options = {});

/// Full-data composite loss of `synth` against `data` (both in forging
/// space). The alignment term uses a seeded reference subsample of at most
/// kAlignmentReferenceRows rows.
double full_data_loss(const Dataset& synth, const Dataset& data, const KernelSpec& kernel,
                      double nu, int iterations, const ForgeConfig& config);

inline constexpr Index kAlignmentReferenceRows = 512;

std::string hash_dataset(const Dataset& data);

}  // namespace enfo
