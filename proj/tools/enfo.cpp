#include "enfo/csv.hpp"
#include "enfo/error.hpp"
#include "enfo/experiment.hpp"
#include "enfo/model_io.hpp"
#include "enfo/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace enfo;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    return experiment_config_from_json(read_json_file(path));
}

// Key model settings resolved from the training data, standardized space.
struct Key {
    KernelSpec kernel;
    double nu = kDefaultNu;
    int iterations = 1;
};

Key resolve_key(const Dataset& train_std, const KeyConfig& k, std::uint64_t seed) {
    Key key;
    key.nu = k.nu;
    key.kernel.bandwidth = k.bandwidth ? *k.bandwidth : median_bandwidth(train_std.features, seed);
    key.iterations = k.iterations ? *k.iterations : select_iterations(train_std, key.kernel, key.nu, k.cv);
    return key;
}

Key key_from_model(const NuMethodModel& m) { return {m.kernel, m.nu, m.iterations}; }

std::vector<Index> seeded_rows(Index n, Index k, std::uint64_t seed, std::uint64_t stream) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto rng = make_rng(seed, stream);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(std::min(k, n)));
    return idx;
}

struct KeyFlags {
    std::optional<double> nu;
    std::optional<double> bandwidth;
    std::optional<int> iterations;
    std::optional<int> t_max;
    std::optional<int> folds;

    void add(CLI::App* app) {
        app->add_option("--nu", nu, "nu-method order");
        app->add_option("--bandwidth", bandwidth, "Gaussian bandwidth (default: median heuristic)");
        app->add_option("--iterations", iterations, "iteration count T (default: cross-validated)");
        app->add_option("--t-max", t_max, "largest T tried by cross-validation");
        app->add_option("--folds", folds, "cross-validation folds");
    }
    void apply(KeyConfig& k) const {
        if (nu) k.nu = *nu;
        if (bandwidth) k.bandwidth = bandwidth;
        if (iterations) k.iterations = iterations;
        if (t_max) k.cv.t_max = *t_max;
        if (folds) k.cv.folds = *folds;
    }
};

void cmd_datagen(const std::string& task, Index n, double noise, std::uint64_t seed,
                 const std::string& data_path, const std::string& kind, double swap_fraction,
                 int covariates, const std::string& out) {
    Dataset d;
    if (task == "friedman3") {
        d = gen_friedman3({n, noise, seed});
    } else if (task == "clv") {
        ClvConfig c;
        c.n = n;
        c.d_covariates = covariates;
        c.seed = seed;
        d = gen_clv(c);
    } else if (task == "perturb") {
        require(!data_path.empty(), "datagen --task perturb needs --data");
        Perturbation p;
        if (kind == "round2") {
            p.kind = PerturbKind::round2;
        } else if (kind == "topcode95") {
            p.kind = PerturbKind::topcode95;
        } else if (kind == "swap") {
            p.kind = PerturbKind::swap;
        } else {
            throw InputError("unknown perturbation '" + kind + "'");
        }
        p.swap_fraction = swap_fraction;
        d = perturb_baseline(read_csv(data_path), p, seed);
    } else {
        throw InputError("unknown datagen task '" + task + "'");
    }
    write_csv(d, out);
    std::cout << "wrote " << d.rows() << " rows to " << out << '\n';
}

void cmd_encapsulate(const std::string& data_path, const std::string& config_path, const KeyFlags& flags,
                     std::uint64_t seed, const std::string& out) {
    ExperimentConfig cfg = load_config(config_path);
    flags.apply(cfg.key);
    cfg.key.cv.seed = seed;
    validate(cfg.key.cv);
    const Dataset data = read_csv(data_path);
    const Standardization s = fit_standardization(data);
    const Dataset train_std = standardize(data, s);
    const Key key = resolve_key(train_std, cfg.key, seed);
    NuMethodModel model = nu_method_fit(train_std, key.kernel, key.nu, key.iterations);
    model.standardization = s;
    save_model(model, out);
    std::cout << json{{"bandwidth", key.kernel.bandwidth}, {"nu", key.nu}, {"iterations", key.iterations},
                      {"model", out}}
                     .dump()
              << '\n';
}

struct ForgeFlags {
    std::string data;
    std::string model;
    std::string config;
    std::string out;
    std::optional<int> m, epochs, batch;
    std::optional<double> lr, lambda, beta, blur;
    std::optional<std::uint64_t> seed;
    KeyFlags key;
};

void cmd_forge(const ForgeFlags& f) {
    ExperimentConfig cfg = load_config(f.config);
    ForgeConfig fc = cfg.forge;
    if (f.m) fc.m = *f.m;
    if (f.epochs) fc.epochs = *f.epochs;
    if (f.batch) fc.batch_size = *f.batch;
    if (f.lr) fc.learning_rate = *f.lr;
    if (f.lambda) fc.lambda_align = *f.lambda;
    if (f.beta) fc.beta_adapt = *f.beta;
    if (f.blur) fc.sinkhorn_blur = *f.blur;
    if (f.seed) fc.seed = *f.seed;
    validate(fc);

    const Dataset data = read_csv(f.data);
    Standardization s = fit_standardization(data);
    Key key;
    if (!f.model.empty()) {
        const NuMethodModel model = load_model(f.model);
        key = key_from_model(model);
        if (model.standardization) s = *model.standardization;
    } else {
        f.key.apply(cfg.key);
        key = resolve_key(standardize(data, s), cfg.key, fc.seed);
    }
    ForgeOptions opts;
    opts.standardization = &s;
    const SyntheticDataset out = forge(data, key.kernel, key.nu, key.iterations, fc, opts);
    write_csv(out.data, f.out);
    json prov = to_json(out.provenance);
    prov["forge_config"] = to_json(fc);
    write_json(prov, f.out + ".provenance.json");
    std::cout << "wrote " << out.data.rows() << " rows to " << f.out << " (loss " << out.provenance.initial_loss
              << " -> " << out.provenance.final_loss << ")\n";
}

struct EvalFlags {
    std::string synthetic, train, test, user, model, config, output_dir;
    std::optional<std::uint64_t> seed;
    KeyFlags key;
};

void cmd_evaluate(const EvalFlags& f) {
    ExperimentConfig cfg = load_config(f.config);
    if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
    const std::uint64_t seed = f.seed.value_or(cfg.forge.seed);
    const Dataset synth = read_csv(f.synthetic);
    const Dataset train = read_csv(f.train);
    const Dataset test = read_csv(f.test);

    PreparedTask task;
    task.train = train;
    task.test = test;
    if (!f.user.empty()) task.user = read_csv(f.user);
    task.standardization = fit_standardization(train);
    Key key;
    if (!f.model.empty()) {
        const NuMethodModel model = load_model(f.model);
        key = key_from_model(model);
        if (model.standardization) task.standardization = *model.standardization;
    } else {
        f.key.apply(cfg.key);
        key = resolve_key(standardize(train, task.standardization), cfg.key, seed);
    }
    task.kernel = key.kernel;
    task.nu = key.nu;
    task.iterations = key.iterations;
    cfg.key.bandwidth = key.kernel.bandwidth;
    cfg.key.iterations = key.iterations;
    cfg.task.kind = TaskKind::csv;
    cfg.task.csv_path = f.train;
    cfg.augmentation_size = std::min(cfg.augmentation_size, task.user.rows());
    cfg.sections.clear();
    ExperimentContext ctx(cfg, task);

    json report;
    report["schema_version"] = kExperimentSchemaVersion;
    report["config_echo"] = to_json(cfg);
    report["designated_rmse"] = ctx.designated_rmse(synth);
    report["krr_rmse"] = ctx.krr_rmse(synth, seed);
    report["svr_rmse"] = ctx.svr_rmse(synth, seed);
    const DivergenceReport d = divergences(ctx.to_std(synth), ctx.to_std(train), cfg.bins);
    report["divergences"] = {{"kl", d.kl}, {"jsd", d.jsd}, {"wasserstein", d.wasserstein}, {"bins", d.bins}};
    report["augmented_rmse"] = task.user.rows() > 0 && cfg.augmentation_size > 0
                                   ? ctx.designated_rmse(concat(synth, select_rows(task.user, seeded_rows(
                                                                    task.user.rows(), cfg.augmentation_size, 0, 0))))
                                   : report["designated_rmse"].get<double>();
    const Index half = std::min({cfg.privacy.candidates / 2, train.rows(), test.rows()});
    AttackConfig attack;
    attack.epsilon_percentile = cfg.privacy.epsilon_percentile;
    attack.seed = seed;
    report["mcaa"] = mcaa(ctx.to_std(synth), ctx.to_std(select_rows(train, seeded_rows(train.rows(), half, seed, 1))),
                          ctx.to_std(select_rows(test, seeded_rows(test.rows(), half, seed, 2))), attack);

    fs::create_directories(cfg.output_dir);
    const fs::path path = fs::path(cfg.output_dir) / "report.json";
    write_json(report, path);
    std::cout << report.dump(2) << '\n';
}

void cmd_attack(const std::string& synthetic, const std::string& members, const std::string& nonmembers,
                double percentile, std::uint64_t seed, const std::string& output_dir) {
    AttackConfig attack;
    attack.epsilon_percentile = percentile;
    attack.seed = seed;
    const double value = mcaa(read_csv(synthetic), read_csv(members), read_csv(nonmembers), attack);
    const json report{{"schema_version", kExperimentSchemaVersion},
                      {"mcaa", value},
                      {"epsilon_percentile", percentile},
                      {"seed", seed}};
    fs::create_directories(output_dir);
    write_json(report, fs::path(output_dir) / "attack.json");
    std::cout << report.dump() << '\n';
}

void cmd_benchmark(const std::string& config_path, const std::string& output_dir) {
    require(!config_path.empty(), "benchmark needs --config");
    ExperimentConfig cfg = load_config(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    const json report = run_benchmark(cfg, true);
    std::cout << "report written to " << (fs::path(cfg.output_dir) / "report.json").string() << '\n';
    std::cout << json{{"designated_rmse", report["designated_rmse"]},
                      {"krr_rmse", report["krr_rmse"]},
                      {"svr_rmse", report["svr_rmse"]},
                      {"mcaa", report["mcaa"]}}
                     .dump()
              << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"enfo: encapsulate a regression dataset into a key model and forge synthetic data"};
    app.require_subcommand(1);

    // datagen
    auto* gen = app.add_subcommand("datagen", "generate or perturb a dataset");
    std::string gen_task = "friedman3", gen_data, gen_kind = "round2", gen_out;
    Index gen_n = 1000;
    double gen_noise = 0.1, gen_swap = 1.0;
    std::uint64_t gen_seed = 0;
    int gen_cov = 10;
    gen->add_option("--task", gen_task, "friedman3, clv or perturb")->capture_default_str();
    gen->add_option("--n", gen_n, "rows")->capture_default_str();
    gen->add_option("--noise", gen_noise, "Friedman noise std")->capture_default_str();
    gen->add_option("--seed", gen_seed)->capture_default_str();
    gen->add_option("--covariates", gen_cov, "CLV covariate count")->capture_default_str();
    gen->add_option("--data", gen_data, "input CSV for --task perturb");
    gen->add_option("--kind", gen_kind, "round2, topcode95 or swap")->capture_default_str();
    gen->add_option("--swap-fraction", gen_swap)->capture_default_str();
    gen->add_option("--out", gen_out, "output CSV")->required();

    // encapsulate
    auto* enc = app.add_subcommand("encapsulate", "fit the key model and save it as JSON");
    std::string enc_data, enc_config, enc_out;
    std::uint64_t enc_seed = 0;
    KeyFlags enc_key;
    enc->add_option("--data", enc_data, "training CSV")->required();
    enc->add_option("--config", enc_config, "experiment config JSON");
    enc->add_option("--seed", enc_seed)->capture_default_str();
    enc->add_option("--out", enc_out, "model JSON")->required();
    enc_key.add(enc);

    // forge
    auto* frg = app.add_subcommand("forge", "forge a synthetic dataset");
    ForgeFlags ff;
    frg->add_option("--data", ff.data, "training CSV")->required();
    frg->add_option("--model", ff.model, "key model JSON from encapsulate");
    frg->add_option("--config", ff.config, "experiment config JSON (forge and key sections)");
    frg->add_option("--m", ff.m, "synthetic rows");
    frg->add_option("--epochs", ff.epochs);
    frg->add_option("--batch", ff.batch);
    frg->add_option("--lr", ff.lr, "Adam learning rate");
    frg->add_option("--lambda", ff.lambda, "alignment weight");
    frg->add_option("--beta", ff.beta, "adaptability weight");
    frg->add_option("--blur", ff.blur, "Sinkhorn blur");
    frg->add_option("--seed", ff.seed);
    frg->add_option("--out", ff.out, "synthetic CSV; provenance goes to <out>.provenance.json")->required();
    ff.key.add(frg);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score a synthetic dataset");
    EvalFlags ef;
    ev->add_option("--synthetic", ef.synthetic)->required();
    ev->add_option("--train", ef.train, "original training CSV")->required();
    ev->add_option("--test", ef.test, "test CSV")->required();
    ev->add_option("--user", ef.user, "held-out rows for the augmentation check");
    ev->add_option("--model", ef.model, "key model JSON");
    ev->add_option("--config", ef.config, "experiment config JSON");
    ev->add_option("--seed", ef.seed);
    ev->add_option("--output-dir", ef.output_dir);
    ef.key.add(ev);

    // attack
    auto* atk = app.add_subcommand("attack", "distance-based membership attack (MCAA)");
    std::string atk_synth, atk_mem, atk_non, atk_out = "enfo_out";
    double atk_pct = 1.0;
    std::uint64_t atk_seed = 0;
    atk->add_option("--synthetic", atk_synth)->required();
    atk->add_option("--members", atk_mem)->required();
    atk->add_option("--nonmembers", atk_non)->required();
    atk->add_option("--percentile", atk_pct, "epsilon percentile")->capture_default_str();
    atk->add_option("--seed", atk_seed)->capture_default_str();
    atk->add_option("--output-dir", atk_out)->capture_default_str();

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "run the experiment suite from a config");
    std::string bench_config, bench_out;
    bench->add_option("--config", bench_config, "experiment config JSON")->required();
    bench->add_option("--output-dir", bench_out, "overrides output_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) {
            cmd_datagen(gen_task, gen_n, gen_noise, gen_seed, gen_data, gen_kind, gen_swap, gen_cov, gen_out);
        } else if (enc->parsed()) {
            cmd_encapsulate(enc_data, enc_config, enc_key, enc_seed, enc_out);
        } else if (frg->parsed()) {
            cmd_forge(ff);
        } else if (ev->parsed()) {
            cmd_evaluate(ef);
        } else if (atk->parsed()) {
            cmd_attack(atk_synth, atk_mem, atk_non, atk_pct, atk_seed, atk_out);
        } else if (bench->parsed()) {
            cmd_benchmark(bench_config, bench_out);
        }
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
