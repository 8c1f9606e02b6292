#include "enfo/experiment.hpp"

#include "enfo/csv.hpp"
#include "enfo/error.hpp"
#include "enfo/parallel.hpp"
#include "enfo/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace enfo {

using nlohmann::json;

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::friedman3: return "friedman3";
        case TaskKind::clv: return "clv";
        case TaskKind::csv: return "csv";
    }
    return "unknown";
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "friedman3") return TaskKind::friedman3;
    if (name == "clv") return TaskKind::clv;
    if (name == "csv" || name == "csv_path") return TaskKind::csv;
    throw InputError("unknown task '" + name + "' (expected friedman3, clv or csv)");
}

namespace {

const std::vector<std::string> kAllSections{"specificity", "augmentation", "privacy", "volume",
                                            "velocity"};

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    require(j.is_object(), where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        require(known.count(key) == 1, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
    if (j.contains(key)) {
        if (j.at(key).is_null()) {
            out.reset();
        } else {
            out = j.at(key).get<T>();
        }
    }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json stability_or_null(const std::vector<double>& v) {
    return v.size() >= 2 ? json(stability_std(v)) : json(nullptr);
}

Dataset head_rows(const Dataset& data, Index n) {
    std::vector<Index> rows(static_cast<std::size_t>(std::min(n, data.rows())));
    std::iota(rows.begin(), rows.end(), Index{0});
    return select_rows(data, rows);
}

Dataset range_rows(const Dataset& data, Index start, Index count) {
    std::vector<Index> rows(static_cast<std::size_t>(count));
    std::iota(rows.begin(), rows.end(), start);
    return select_rows(data, rows);
}

std::vector<Index> seeded_choice(Index n, Index k, std::uint64_t seed, std::uint64_t stream) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto rng = make_rng(seed, stream);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

}  // namespace

void validate(const ExperimentConfig& c) {
    require(c.schema_version == kExperimentSchemaVersion,
            "unsupported experiment schema_version " + std::to_string(c.schema_version));
    const TaskConfig& t = c.task;
    require(t.n_train >= 2, "task.n_train must be >= 2");
    require(t.n_test >= 1 || t.kind == TaskKind::csv, "task.n_test must be >= 1");
    require(t.n_user >= 0, "task.n_user must be >= 0");
    require(t.noise_std >= 0.0, "task.noise_std must be >= 0");
    if (t.kind == TaskKind::csv) {
        require(!t.csv_path.empty(), "task.csv_path is required for csv tasks");
        require(t.test_fraction > 0.0 && t.test_fraction < 1.0, "task.test_fraction must be in (0, 1)");
    }
    require(c.key.nu > 0.0, "key.nu must be positive");
    if (c.key.bandwidth) require(*c.key.bandwidth > 0.0, "key.bandwidth must be positive");
    if (c.key.iterations) require(*c.key.iterations >= 1, "key.iterations must be >= 1");
    validate(c.key.cv);
    validate(c.forge);
    require(c.repeats >= 1, "repeats must be >= 1");
    require(c.augmentation_size >= 0, "augmentation_size must be >= 0");
    require(c.augmentation_size <= t.n_user || t.kind == TaskKind::csv,
            "augmentation_size exceeds task.n_user");
    require(c.bins >= 1, "bins must be >= 1");
    require(c.baselines.krr_folds >= 2, "baselines.krr_folds must be >= 2");
    require(c.baselines.svr_iters >= 1, "baselines.svr_iters must be >= 1");
    require(c.baselines.svr_c > 0.0, "baselines.svr_c must be positive");
    require(c.baselines.svr_epsilon_factor >= 0.0, "baselines.svr_epsilon_factor must be >= 0");
    require(c.privacy.candidates >= 2 && c.privacy.candidates % 2 == 0,
            "privacy.candidates must be an even number >= 2");
    require(c.privacy.pool_size >= 1, "privacy.pool_size must be >= 1");
    require(c.privacy.m >= 1 && c.privacy.m <= c.privacy.pool_size, "privacy.m must lie in [1, pool_size]");
    require(c.privacy.candidates / 2 <= c.privacy.pool_size, "privacy needs candidates/2 <= pool_size");
    require(c.privacy.epsilon_percentile > 0.0 && c.privacy.epsilon_percentile < 100.0,
            "privacy.epsilon_percentile must be in (0, 100)");
    require(c.velocity.m >= 1, "velocity.m must be >= 1");
    require(c.velocity.pre_epochs >= 1 && c.velocity.post_epochs >= 1, "velocity epochs must be >= 1");
    require(c.velocity.tolerance >= 0.0, "velocity.tolerance must be >= 0");
    require(c.velocity.scal_small >= 1 && c.velocity.scal_large >= 1, "scalability sizes must be >= 1");
    require(c.velocity.scal_m >= 1 && c.velocity.scal_batch >= 1, "scalability m and batch must be >= 1");
    require(c.velocity.scal_min_steps >= 1, "velocity.scal_min_steps must be >= 1");
    for (const auto& s : c.sections) {
        require(std::find(kAllSections.begin(), kAllSections.end(), s) != kAllSections.end(),
                "unknown section '" + s + "'");
    }
    const auto needs = [&](const char* name) {
        return std::find(c.sections.begin(), c.sections.end(), name) != c.sections.end();
    };
    if (needs("specificity") || needs("augmentation") || needs("volume")) {
        require(!c.sweeps.m.empty(), "sweeps.m must be non-empty");
    }
    if (needs("specificity")) require(!c.sweeps.beta.empty(), "sweeps.beta must be non-empty");
    if (needs("augmentation")) require(!c.sweeps.lambda.empty(), "sweeps.lambda must be non-empty");
    for (int m : c.sweeps.m) require(m >= 1 && m <= t.n_train, "sweep M outside [1, n_train]");
    for (double l : c.sweeps.lambda) require(l >= 0.0, "sweep lambda must be >= 0");
    for (double b : c.sweeps.beta) require(b >= 0.0, "sweep beta must be >= 0");
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["task"] = {{"kind", to_string(c.task.kind)},
                 {"n_train", c.task.n_train},
                 {"n_test", c.task.n_test},
                 {"n_user", c.task.n_user},
                 {"noise_std", c.task.noise_std},
                 {"seed", c.task.seed},
                 {"csv_path", c.task.csv_path},
                 {"test_fraction", c.task.test_fraction},
                 {"clv_covariates", c.task.clv_covariates},
                 {"clv_calib_weeks", c.task.clv_calib_weeks},
                 {"clv_holdout_weeks", c.task.clv_holdout_weeks}};
    j["key"] = {{"nu", c.key.nu},
                {"bandwidth", optional_json(c.key.bandwidth)},
                {"iterations", optional_json(c.key.iterations)},
                {"cv_folds", c.key.cv.folds},
                {"cv_holdout_fraction", optional_json(c.key.cv.holdout_fraction)},
                {"t_max", c.key.cv.t_max},
                {"cv_seed", c.key.cv.seed}};
    j["forge"] = to_json(c.forge);
    j["sweeps"] = {{"m", c.sweeps.m}, {"lambda", c.sweeps.lambda}, {"beta", c.sweeps.beta}};
    j["repeats"] = c.repeats;
    j["augmentation_size"] = c.augmentation_size;
    j["baselines"] = {{"krr_folds", c.baselines.krr_folds},
                      {"svr_iters", c.baselines.svr_iters},
                      {"svr_c", c.baselines.svr_c},
                      {"svr_epsilon_factor", c.baselines.svr_epsilon_factor}};
    j["privacy"] = {{"pool_size", c.privacy.pool_size},
                    {"m", c.privacy.m},
                    {"candidates", c.privacy.candidates},
                    {"epsilon_percentile", c.privacy.epsilon_percentile}};
    j["velocity"] = {{"m", c.velocity.m},
                     {"pre_epochs", c.velocity.pre_epochs},
                     {"post_epochs", c.velocity.post_epochs},
                     {"tolerance", c.velocity.tolerance},
                     {"scal_small", c.velocity.scal_small},
                     {"scal_large", c.velocity.scal_large},
                     {"scal_m", c.velocity.scal_m},
                     {"scal_batch", c.velocity.scal_batch},
                     {"scal_min_steps", c.velocity.scal_min_steps}};
    j["bins"] = c.bins;
    j["sections"] = c.sections;
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig c;
    check_keys(j,
               {"schema_version", "task", "key", "forge", "sweeps", "repeats", "augmentation_size",
                "baselines", "privacy", "velocity", "bins", "sections", "output_dir"},
               "experiment config");
    try {
        read(j, "schema_version", c.schema_version);
        if (j.contains("task")) {
            const json& t = j.at("task");
            check_keys(t,
                       {"kind", "n_train", "n_test", "n_user", "noise_std", "seed", "csv_path",
                        "test_fraction", "clv_covariates", "clv_calib_weeks", "clv_holdout_weeks"},
                       "task");
            if (t.contains("kind")) c.task.kind = task_kind_from_string(t.at("kind").get<std::string>());
            read(t, "n_train", c.task.n_train);
            read(t, "n_test", c.task.n_test);
            read(t, "n_user", c.task.n_user);
            read(t, "noise_std", c.task.noise_std);
            read(t, "seed", c.task.seed);
            read(t, "csv_path", c.task.csv_path);
            read(t, "test_fraction", c.task.test_fraction);
            read(t, "clv_covariates", c.task.clv_covariates);
            read(t, "clv_calib_weeks", c.task.clv_calib_weeks);
            read(t, "clv_holdout_weeks", c.task.clv_holdout_weeks);
        }
        if (j.contains("key")) {
            const json& k = j.at("key");
            check_keys(k,
                       {"nu", "bandwidth", "iterations", "cv_folds", "cv_holdout_fraction", "t_max",
                        "cv_seed"},
                       "key");
            read(k, "nu", c.key.nu);
            read_optional(k, "bandwidth", c.key.bandwidth);
            read_optional(k, "iterations", c.key.iterations);
            read(k, "cv_folds", c.key.cv.folds);
            read_optional(k, "cv_holdout_fraction", c.key.cv.holdout_fraction);
            read(k, "t_max", c.key.cv.t_max);
            read(k, "cv_seed", c.key.cv.seed);
        }
        if (j.contains("forge")) c.forge = forge_config_from_json(j.at("forge"));
        if (j.contains("sweeps")) {
            const json& s = j.at("sweeps");
            check_keys(s, {"m", "lambda", "beta"}, "sweeps");
            read(s, "m", c.sweeps.m);
            read(s, "lambda", c.sweeps.lambda);
            read(s, "beta", c.sweeps.beta);
        }
        read(j, "repeats", c.repeats);
        read(j, "augmentation_size", c.augmentation_size);
        if (j.contains("baselines")) {
            const json& b = j.at("baselines");
            check_keys(b, {"krr_folds", "svr_iters", "svr_c", "svr_epsilon_factor"}, "baselines");
            read(b, "krr_folds", c.baselines.krr_folds);
            read(b, "svr_iters", c.baselines.svr_iters);
            read(b, "svr_c", c.baselines.svr_c);
            read(b, "svr_epsilon_factor", c.baselines.svr_epsilon_factor);
        }
        if (j.contains("privacy")) {
            const json& p = j.at("privacy");
            check_keys(p, {"pool_size", "m", "candidates", "epsilon_percentile"}, "privacy");
            read(p, "pool_size", c.privacy.pool_size);
            read(p, "m", c.privacy.m);
            read(p, "candidates", c.privacy.candidates);
            read(p, "epsilon_percentile", c.privacy.epsilon_percentile);
        }
        if (j.contains("velocity")) {
            const json& v = j.at("velocity");
            check_keys(v,
                       {"m", "pre_epochs", "post_epochs", "tolerance", "scal_small", "scal_large",
                        "scal_m", "scal_batch", "scal_min_steps"},
                       "velocity");
            read(v, "m", c.velocity.m);
            read(v, "pre_epochs", c.velocity.pre_epochs);
            read(v, "post_epochs", c.velocity.post_epochs);
            read(v, "tolerance", c.velocity.tolerance);
            read(v, "scal_small", c.velocity.scal_small);
            read(v, "scal_large", c.velocity.scal_large);
            read(v, "scal_m", c.velocity.scal_m);
            read(v, "scal_batch", c.velocity.scal_batch);
            read(v, "scal_min_steps", c.velocity.scal_min_steps);
        }
        read(j, "bins", c.bins);
        read(j, "sections", c.sections);
        read(j, "output_dir", c.output_dir);
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed experiment config: ") + e.what());
    }
    validate(c);
    return c;
}

namespace {

struct Splits {
    Dataset train;
    Dataset test;
    Dataset user;
};

Splits make_splits(const TaskConfig& t) {
    Splits s;
    if (t.kind == TaskKind::csv) {
        const Dataset all = read_csv(t.csv_path);
        const std::vector<Index> order = seeded_choice(all.rows(), all.rows(), t.seed, 0x73706c6974ULL);
        const Index n_user = std::min(t.n_user, all.rows());
        const Index rest = all.rows() - n_user;
        const auto n_test = static_cast<Index>(std::llround(t.test_fraction * static_cast<double>(rest)));
        require(rest - n_test >= 2 && n_test >= 1, "CSV task has too few rows for the requested splits");
        auto slice = [&](Index from, Index count) {
            return select_rows(all, std::vector<Index>(order.begin() + from, order.begin() + from + count));
        };
        if (n_user > 0) s.user = slice(0, n_user);
        s.test = slice(n_user, n_test);
        s.train = slice(n_user + n_test, rest - n_test);
        return s;
    }
    const Index total = t.n_train + t.n_test + t.n_user;
    Dataset all;
    if (t.kind == TaskKind::friedman3) {
        all = gen_friedman3({total, t.noise_std, t.seed});
    } else {
        ClvConfig clv;
        clv.n = total;
        clv.d_covariates = t.clv_covariates;
        clv.calib_weeks = t.clv_calib_weeks;
        clv.holdout_weeks = t.clv_holdout_weeks;
        clv.seed = t.seed;
        all = gen_clv(clv);
    }
    s.train = range_rows(all, 0, t.n_train);
    s.test = range_rows(all, t.n_train, t.n_test);
    if (t.n_user > 0) s.user = range_rows(all, t.n_train + t.n_test, t.n_user);
    return s;
}

// Fresh rows from the task's generator, for the scalability runs.
Dataset sample_task_rows(const ExperimentConfig& c, const PreparedTask& task, Index n, std::uint64_t stream) {
    const TaskConfig& t = c.task;
    const std::uint64_t seed = derive_seed(t.seed, stream);
    if (t.kind == TaskKind::friedman3) return gen_friedman3({n, t.noise_std, seed});
    if (t.kind == TaskKind::clv) {
        ClvConfig clv;
        clv.n = n;
        clv.d_covariates = t.clv_covariates;
        clv.calib_weeks = t.clv_calib_weeks;
        clv.holdout_weeks = t.clv_holdout_weeks;
        clv.seed = t.seed;  // same coefficients as the task
        // Skip past the rows the task itself used by drawing extra and
        // keeping the tail.
        clv.n = n + t.n_train + t.n_test + t.n_user;
        const Dataset all = gen_clv(clv);
        return range_rows(all, all.rows() - n, n);
    }
    // CSV tasks resample the training split with replacement.
    auto rng = make_rng(seed, 0);
    std::uniform_int_distribution<Index> pick(0, task.train.rows() - 1);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = pick(rng);
    return select_rows(task.train, rows);
}

}  // namespace

PreparedTask prepare_task(const ExperimentConfig& config) {
    validate(config);
    const auto t0 = std::chrono::steady_clock::now();
    Splits splits = make_splits(config.task);
    PreparedTask p;
    p.train = std::move(splits.train);
    p.test = std::move(splits.test);
    p.user = std::move(splits.user);
    p.standardization = fit_standardization(p.train);
    const Dataset train_std = standardize(p.train, p.standardization);
    p.nu = config.key.nu;
    p.kernel.family = KernelFamily::gaussian;
    p.kernel.bandwidth = config.key.bandwidth ? *config.key.bandwidth
                                              : median_bandwidth(train_std.features, config.task.seed);
    p.iterations = config.key.iterations ? *config.key.iterations
                                         : select_iterations(train_std, p.kernel, p.nu, config.key.cv);
    const NuMethodModel full = nu_method_fit(train_std, p.kernel, p.nu, p.iterations);
    const Dataset test_std = standardize(p.test, p.standardization);
    p.full_data_rmse = rmse(predict(full, test_std.features), test_std.target) *
                       p.standardization.target_std;
    p.encapsulate_ms = elapsed_ms(t0);
    return p;
}

ExperimentContext::ExperimentContext(ExperimentConfig config)
    : config_(std::move(config)), task_(prepare_task(config_)) {}

ExperimentContext::ExperimentContext(ExperimentConfig config, PreparedTask task)
    : config_(std::move(config)), task_(std::move(task)) {
    validate(config_);
}

Dataset ExperimentContext::to_std(const Dataset& data) const {
    return standardize(data, task_.standardization);
}

SyntheticDataset ExperimentContext::forge_cell(const ForgeKey& key) const {
    ForgeConfig cfg = config_.forge;
    std::tie(cfg.m, cfg.lambda_align, cfg.beta_adapt, cfg.seed) = key;
    ForgeOptions opts;
    opts.standardization = &task_.standardization;
    return forge(task_.train, task_.kernel, task_.nu, task_.iterations, cfg, opts);
}

const SyntheticDataset& ExperimentContext::forged(int m, double lambda, double beta, std::uint64_t seed) {
    const ForgeKey key{m, lambda, beta, seed};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(key, forge_cell(key)).first->second;
}

void ExperimentContext::prefetch(const std::vector<ForgeKey>& keys) {
    std::vector<ForgeKey> missing;
    for (const auto& k : keys) {
        if (!cache_.count(k) && std::find(missing.begin(), missing.end(), k) == missing.end()) {
            missing.push_back(k);
        }
    }
    std::vector<std::optional<SyntheticDataset>> out(missing.size());
    parallel_for(missing.size(), [&](std::size_t i) { out[i] = forge_cell(missing[i]); });
    for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(*out[i]));
}

double ExperimentContext::designated_rmse(const Dataset& data) const {
    const NuMethodModel model = nu_method_fit(to_std(data), task_.kernel, task_.nu, task_.iterations);
    return model_rmse(model, to_std(task_.test)) * task_.standardization.target_std;
}

double ExperimentContext::krr_rmse(const Dataset& data, std::uint64_t seed) const {
    const Dataset d = to_std(data);
    const double ridge = select_ridge(d, task_.kernel, default_ridge_grid(), config_.baselines.krr_folds, seed);
    return model_rmse(krr_fit(d, task_.kernel, ridge), to_std(task_.test)) *
           task_.standardization.target_std;
}

double ExperimentContext::svr_rmse(const Dataset& data, std::uint64_t seed) const {
    const Dataset d = to_std(data);
    SvrSettings s;
    const double y_std = std::sqrt((d.target.array() - d.target.mean()).square().mean());
    s.epsilon_tube = config_.baselines.svr_epsilon_factor * y_std;
    s.c_penalty = config_.baselines.svr_c;
    s.iters = config_.baselines.svr_iters;
    s.seed = seed;
    return model_rmse(svr_fit(d, task_.kernel, s), to_std(task_.test)) *
           task_.standardization.target_std;
}

std::vector<std::uint64_t> repeat_seeds(const ExperimentConfig& config) {
    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < config.repeats; ++r) seeds.push_back(config.forge.seed + static_cast<std::uint64_t>(r));
    return seeds;
}

json run_specificity(ExperimentContext& ctx) {
    const auto& c = ctx.config();
    std::vector<ExperimentContext::ForgeKey> keys;
    for (int m : c.sweeps.m) {
        for (double beta : c.sweeps.beta) {
            for (std::uint64_t seed : repeat_seeds(c)) keys.emplace_back(m, c.forge.lambda_align, beta, seed);
        }
    }
    ctx.prefetch(keys);
    json cells = json::array();
    json table = json::array();
    for (int m : c.sweeps.m) {
        for (double beta : c.sweeps.beta) {
            std::vector<double> des, krr, svr;
            for (std::uint64_t seed : repeat_seeds(c)) {
                const Dataset& synth = ctx.forged(m, c.forge.lambda_align, beta, seed).data;
                des.push_back(ctx.designated_rmse(synth));
                krr.push_back(ctx.krr_rmse(synth, seed));
                svr.push_back(ctx.svr_rmse(synth, seed));
                table.push_back({{"m", m}, {"beta", beta}, {"seed", seed}, {"designated_rmse", des.back()},
                                 {"krr_rmse", krr.back()}, {"svr_rmse", svr.back()}});
            }
            cells.push_back({{"m", m},
                             {"beta", beta},
                             {"designated_rmse", mean_of(des)},
                             {"krr_rmse", mean_of(krr)},
                             {"svr_rmse", mean_of(svr)},
                             {"krr_ratio", mean_of(krr) / mean_of(des)},
                             {"svr_ratio", mean_of(svr) / mean_of(des)}});
        }
    }
    return {{"cells", cells}, {"table", table}};
}

json run_augmentation(ExperimentContext& ctx) {
    const auto& c = ctx.config();
    const auto& task = ctx.task();
    const Dataset user = head_rows(task.user, c.augmentation_size);
    std::vector<ExperimentContext::ForgeKey> keys;
    for (std::uint64_t seed : repeat_seeds(c)) {
        for (int m : c.sweeps.m) keys.emplace_back(m, c.forge.lambda_align, c.forge.beta_adapt, seed);
        for (double lambda : c.sweeps.lambda) keys.emplace_back(c.sweeps.m.front(), lambda, c.forge.beta_adapt, seed);
    }
    ctx.prefetch(keys);
    json cells = json::array();
    json table = json::array();
    for (int m : c.sweeps.m) {
        std::vector<double> base, aug;
        for (std::uint64_t seed : repeat_seeds(c)) {
            const Dataset& synth = ctx.forged(m, c.forge.lambda_align, c.forge.beta_adapt, seed).data;
            base.push_back(ctx.designated_rmse(synth));
            aug.push_back(c.augmentation_size > 0 ? ctx.designated_rmse(concat(synth, user)) : base.back());
            table.push_back({{"m", m}, {"seed", seed}, {"designated_rmse", base.back()},
                             {"augmented_rmse", aug.back()}});
        }
        cells.push_back({{"m", m},
                         {"augmentation_size", c.augmentation_size},
                         {"designated_rmse", mean_of(base)},
                         {"augmented_rmse", mean_of(aug)}});
    }

    // Alignment sweep: distance to the original data and the effect of adding
    // the forged rows to the user's own split.
    json alignment = json::array();
    json alignment_table = json::array();
    const int m0 = c.sweeps.m.front();
    const Dataset train_std = ctx.to_std(task.train);
    const double user_rmse = c.augmentation_size > 0 ? ctx.designated_rmse(user) : 0.0;
    for (double lambda : c.sweeps.lambda) {
        std::vector<double> w, kl, jsd, user_aug;
        for (std::uint64_t seed : repeat_seeds(c)) {
            const Dataset& synth = ctx.forged(m0, lambda, c.forge.beta_adapt, seed).data;
            const DivergenceReport d = divergences(ctx.to_std(synth), train_std, c.bins);
            w.push_back(d.wasserstein);
            kl.push_back(d.kl);
            jsd.push_back(d.jsd);
            user_aug.push_back(c.augmentation_size > 0 ? ctx.designated_rmse(concat(user, synth)) : 0.0);
            alignment_table.push_back({{"lambda", lambda}, {"seed", seed}, {"wasserstein", w.back()},
                                       {"kl", kl.back()}, {"jsd", jsd.back()},
                                       {"user_rmse", user_rmse}, {"user_augmented_rmse", user_aug.back()}});
        }
        alignment.push_back({{"lambda", lambda},
                             {"m", m0},
                             {"wasserstein", mean_of(w)},
                             {"kl", mean_of(kl)},
                             {"jsd", mean_of(jsd)},
                             {"user_rmse", user_rmse},
                             {"user_augmented_rmse", mean_of(user_aug)}});
    }
    return {{"cells", cells}, {"table", table}, {"alignment", alignment},
            {"alignment_table", alignment_table}};
}

json run_privacy(ExperimentContext& ctx) {
    const auto& c = ctx.config();
    const auto& task = ctx.task();
    const PrivacyConfig& p = c.privacy;
    require(p.pool_size <= task.train.rows(), "privacy.pool_size exceeds the training split");
    const Index half = p.candidates / 2;
    require(half <= task.test.rows(), "privacy needs candidates/2 test rows");
    const Dataset pool = head_rows(task.train, p.pool_size);

    json table = json::array();
    std::vector<double> forged_mcaa, sub_mcaa, forged_rmse, sub_rmse;
    for (std::uint64_t seed : repeat_seeds(c)) {
        const Dataset members = select_rows(pool, seeded_choice(pool.rows(), half, seed, 0x6d656dULL));
        const Dataset nonmembers =
            select_rows(task.test, seeded_choice(task.test.rows(), half, seed, 0x6e6f6eULL));
        ForgeConfig cfg = c.forge;
        cfg.m = p.m;
        cfg.seed = seed;
        ForgeOptions opts;
        opts.standardization = &task.standardization;
        const SyntheticDataset forged = forge(pool, task.kernel, task.nu, task.iterations, cfg, opts);
        const Dataset subsample =
            select_rows(pool, seeded_choice(pool.rows(), p.m, seed, 0x737562ULL));
        AttackConfig attack;
        attack.epsilon_percentile = p.epsilon_percentile;
        attack.seed = seed;
        forged_mcaa.push_back(
            mcaa(ctx.to_std(forged.data), ctx.to_std(members), ctx.to_std(nonmembers), attack));
        sub_mcaa.push_back(mcaa(ctx.to_std(subsample), ctx.to_std(members), ctx.to_std(nonmembers), attack));
        forged_rmse.push_back(ctx.designated_rmse(forged.data));
        sub_rmse.push_back(ctx.designated_rmse(subsample));
        table.push_back({{"seed", seed}, {"forged_mcaa", forged_mcaa.back()},
                         {"subsample_mcaa", sub_mcaa.back()}, {"forged_rmse", forged_rmse.back()},
                         {"subsample_rmse", sub_rmse.back()}});
    }
    return {{"pool_size", p.pool_size},
            {"m", p.m},
            {"candidates", p.candidates},
            {"forged_mcaa", mean_of(forged_mcaa)},
            {"subsample_mcaa", mean_of(sub_mcaa)},
            {"forged_rmse", mean_of(forged_rmse)},
            {"subsample_rmse", mean_of(sub_rmse)},
            {"table", table}};
}

json run_volume_sweep(ExperimentContext& ctx) {
    const auto& c = ctx.config();
    const auto& task = ctx.task();
    std::vector<ExperimentContext::ForgeKey> keys;
    for (int m : c.sweeps.m) {
        for (std::uint64_t seed : repeat_seeds(c)) keys.emplace_back(m, c.forge.lambda_align, c.forge.beta_adapt, seed);
    }
    ctx.prefetch(keys);
    json cells = json::array();
    json table = json::array();
    for (int m : c.sweeps.m) {
        std::vector<double> forged, sub;
        for (std::uint64_t seed : repeat_seeds(c)) {
            forged.push_back(ctx.designated_rmse(ctx.forged(m, c.forge.lambda_align, c.forge.beta_adapt, seed).data));
            // The subsample each forging run starts from.
            sub.push_back(ctx.designated_rmse(init_synthetic(task.train, m, seed).data));
            table.push_back({{"m", m}, {"seed", seed}, {"forged_rmse", forged.back()},
                             {"subsample_rmse", sub.back()}});
        }
        cells.push_back({{"m", m},
                         {"forged_mean", mean_of(forged)},
                         {"forged_std", stability_or_null(forged)},
                         {"subsample_mean", mean_of(sub)},
                         {"subsample_std", stability_or_null(sub)}});
    }
    return {{"cells", cells}, {"table", table}, {"full_data_rmse", task.full_data_rmse}};
}

namespace {

// First curve index whose RMSE is within the band, or -1.
int epochs_to_reach(const std::vector<double>& curve, double target) {
    for (std::size_t e = 0; e < curve.size(); ++e) {
        if (curve[e] <= target) return static_cast<int>(e);
    }
    return -1;
}

}  // namespace

json run_scalability(ExperimentContext& ctx) {
    const auto& c = ctx.config();
    const auto& task = ctx.task();
    const VelocityConfig& v = c.velocity;
    json rows = json::array();
    double small_ms = 0.0;
    double large_ms = 0.0;
    for (Index n : {v.scal_small, v.scal_large}) {
        const Dataset data = sample_task_rows(c, task, n, 0x7363616cULL + static_cast<std::uint64_t>(n));
        const std::int64_t per_epoch = (n + v.scal_batch - 1) / v.scal_batch;
        ForgeConfig cfg = c.forge;
        cfg.m = std::min<int>(v.scal_m, static_cast<int>(n));
        cfg.batch_size = v.scal_batch;
        cfg.epochs = static_cast<int>((v.scal_min_steps + per_epoch - 1) / per_epoch);
        ForgeOptions opts;
        opts.standardization = &task.standardization;
        const SyntheticDataset out = forge(data, task.kernel, task.nu, task.iterations, cfg, opts);
        (n == v.scal_small ? small_ms : large_ms) = out.provenance.mean_step_ms;
        rows.push_back({{"n", n}, {"epochs", cfg.epochs}, {"steps", out.provenance.steps},
                        {"mean_step_ms", out.provenance.mean_step_ms}});
    }
    return {{"table", rows}, {"small_step_ms", small_ms}, {"large_step_ms", large_ms},
            {"ratio", small_ms > 0.0 ? large_ms / small_ms : 0.0}};
}

json run_velocity(ExperimentContext& ctx) {
    const auto& c = ctx.config();
    const auto& task = ctx.task();
    const VelocityConfig& v = c.velocity;
    const std::uint64_t seed = c.forge.seed;
    const Index half = task.train.rows() / 2;
    require(v.m <= half, "velocity.m exceeds half of the training split");
    const Dataset split1 = range_rows(task.train, 0, half);
    const Dataset split2 = range_rows(task.train, half, task.train.rows() - half);

    const auto curve_rmse = [&](const Dataset& synth_std) {
        const NuMethodModel model = nu_method_fit(synth_std, task.kernel, task.nu, task.iterations);
        return model_rmse(model, ctx.to_std(task.test)) * task.standardization.target_std;
    };

    ForgeConfig cfg = c.forge;
    cfg.m = v.m;
    cfg.seed = seed;
    cfg.epochs = v.pre_epochs;
    ForgeOptions pre_opts;
    pre_opts.standardization = &task.standardization;
    const SyntheticDataset pre = forge(split1, task.kernel, task.nu, task.iterations, cfg, pre_opts);

    cfg.epochs = v.post_epochs;
    std::vector<double> streamed{ctx.designated_rmse(pre.data)};
    ForgeOptions stream_opts;
    stream_opts.on_epoch = [&](const EpochReport& r) { streamed.push_back(curve_rmse(*r.synthetic)); };
    const SyntheticDataset stream_out =
        forge_streaming(pre, split2, split1, task.kernel, task.nu, task.iterations, cfg, stream_opts);

    const Dataset combined = concat(split1, split2);
    std::vector<double> restart{ctx.designated_rmse(init_synthetic(combined, v.m, seed).data)};
    ForgeOptions restart_opts;
    restart_opts.standardization = &task.standardization;
    restart_opts.on_epoch = [&](const EpochReport& r) { restart.push_back(curve_rmse(*r.synthetic)); };
    const SyntheticDataset restart_out =
        forge(combined, task.kernel, task.nu, task.iterations, cfg, restart_opts);

    const double restart_final = ctx.designated_rmse(restart_out.data);
    const double target = (1.0 + v.tolerance) * restart_final;
    json curve = json::array();
    for (std::size_t e = 0; e < streamed.size(); ++e) {
        curve.push_back({{"epoch", e}, {"streamed_rmse", streamed[e]}, {"restart_rmse", restart[e]}});
    }
    return {{"restart_final_rmse", restart_final},
            {"streamed_final_rmse", ctx.designated_rmse(stream_out.data)},
            {"target_rmse", target},
            {"streamed_epochs_to_target", epochs_to_reach(streamed, target)},
            {"restart_epochs_to_target", epochs_to_reach(restart, target)},
            {"table", curve},
            {"scalability", run_scalability(ctx)}};
}

namespace {

void write_table_csv(const json& rows, const std::filesystem::path& path) {
    if (!rows.is_array() || rows.empty()) return;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    std::vector<std::string> keys;
    for (const auto& [k, _] : rows.front().items()) keys.push_back(k);
    for (std::size_t i = 0; i < keys.size(); ++i) out << (i ? "," : "") << keys[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < keys.size(); ++i) out << (i ? "," : "") << row.at(keys[i]).dump();
        out << '\n';
    }
}

}  // namespace

json run_benchmark(const ExperimentConfig& config, bool write_artifacts) {
    validate(config);
    ExperimentContext ctx(config);
    const PreparedTask& task = ctx.task();

    ExperimentConfig resolved = config;
    resolved.key.bandwidth = task.kernel.bandwidth;
    resolved.key.iterations = task.iterations;

    json report;
    report["schema_version"] = kExperimentSchemaVersion;
    report["config_echo"] = to_json(resolved);
    json timings{{"encapsulate_ms", task.encapsulate_ms}};

    // Headline numbers for the first sweep cell.
    auto t0 = std::chrono::steady_clock::now();
    const int m0 = config.sweeps.m.empty() ? config.forge.m : config.sweeps.m.front();
    const auto seeds = repeat_seeds(config);
    {
        std::vector<ExperimentContext::ForgeKey> keys;
        for (std::uint64_t s : seeds) keys.emplace_back(m0, config.forge.lambda_align, config.forge.beta_adapt, s);
        ctx.prefetch(keys);
    }
    const Dataset& headline = ctx.forged(m0, config.forge.lambda_align, config.forge.beta_adapt, seeds.front()).data;
    report["task"] = {{"n_train", task.train.rows()},
                      {"n_test", task.test.rows()},
                      {"n_user", task.user.rows()},
                      {"bandwidth", task.kernel.bandwidth},
                      {"nu", task.nu},
                      {"iterations", task.iterations},
                      {"full_data_rmse", task.full_data_rmse}};
    report["designated_rmse"] = ctx.designated_rmse(headline);
    report["krr_rmse"] = ctx.krr_rmse(headline, seeds.front());
    report["svr_rmse"] = ctx.svr_rmse(headline, seeds.front());
    const DivergenceReport div = divergences(ctx.to_std(headline), ctx.to_std(task.train), config.bins);
    report["divergences"] = {{"kl", div.kl}, {"jsd", div.jsd}, {"wasserstein", div.wasserstein}, {"bins", div.bins}};
    const Dataset user = head_rows(task.user, config.augmentation_size);
    report["augmented_rmse"] = config.augmentation_size > 0 && user.rows() > 0
                                   ? ctx.designated_rmse(concat(headline, user))
                                   : report["designated_rmse"].get<double>();
    {
        const Index half = std::min({config.privacy.candidates / 2, task.train.rows(), task.test.rows()});
        AttackConfig attack;
        attack.epsilon_percentile = config.privacy.epsilon_percentile;
        attack.seed = seeds.front();
        const Dataset members = select_rows(task.train, seeded_choice(task.train.rows(), half, seeds.front(), 0x6d656dULL));
        const Dataset nonmembers = select_rows(task.test, seeded_choice(task.test.rows(), half, seeds.front(), 0x6e6f6eULL));
        report["mcaa"] = mcaa(ctx.to_std(headline), ctx.to_std(members), ctx.to_std(nonmembers), attack);
    }
    std::vector<double> rmses;
    for (std::uint64_t s : seeds) {
        rmses.push_back(ctx.designated_rmse(ctx.forged(m0, config.forge.lambda_align, config.forge.beta_adapt, s).data));
    }
    report["stability"] = stability_or_null(rmses);
    timings["headline_ms"] = elapsed_ms(t0);

    json sections = json::object();
    const std::vector<std::pair<std::string, json (*)(ExperimentContext&)>> runners{
        {"specificity", run_specificity}, {"augmentation", run_augmentation}, {"privacy", run_privacy},
        {"volume", run_volume_sweep}, {"velocity", run_velocity}};
    for (const auto& [name, fn] : runners) {
        if (std::find(config.sections.begin(), config.sections.end(), name) == config.sections.end()) continue;
        t0 = std::chrono::steady_clock::now();
        sections[name] = fn(ctx);
        timings[name + "_ms"] = elapsed_ms(t0);
    }
    report["sections"] = sections;
    report["timings"] = timings;

    if (write_artifacts) {
        const std::filesystem::path dir(config.output_dir);
        std::filesystem::create_directories(dir);
        write_json(report, dir / "report.json");
        for (const auto& [name, sec] : sections.items()) {
            if (sec.contains("table")) write_table_csv(sec.at("table"), dir / (name + ".csv"));
            if (sec.contains("alignment_table")) write_table_csv(sec.at("alignment_table"), dir / "alignment.csv");
            if (sec.contains("scalability")) write_table_csv(sec.at("scalability").at("table"), dir / "scalability.csv");
        }
    }
    return report;
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace enfo
