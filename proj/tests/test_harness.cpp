#include "test_util.hpp"

#include "enfo/csv.hpp"
#include "enfo/error.hpp"
#include "enfo/experiment.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

using namespace enfo;
using enfo::test::random_dataset;
using nlohmann::json;

namespace {

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in, "mem");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.task.n_train = 240;
    c.task.n_test = 150;
    c.task.n_user = 60;
    c.task.seed = 3;
    c.key.cv.t_max = 40;
    c.forge.m = 15;
    c.forge.epochs = 2;
    c.forge.batch_size = 32;
    c.forge.sinkhorn_iters = 20;
    c.sweeps.m = {15};
    c.sweeps.lambda = {0.0, 1.0};
    c.sweeps.beta = {0.0, 10.0};
    c.repeats = 2;
    c.augmentation_size = 40;
    c.baselines.svr_iters = 200;
    c.privacy.pool_size = 80;
    c.privacy.m = 30;
    c.privacy.candidates = 40;
    c.velocity.m = 15;
    c.velocity.pre_epochs = 2;
    c.velocity.post_epochs = 2;
    c.velocity.scal_small = 100;
    c.velocity.scal_large = 1000;
    c.velocity.scal_m = 10;
    c.velocity.scal_min_steps = 10;
    return c;
}

void check_finite(const json& j, const std::string& path) {
    if (j.is_number_float()) {
        CHECK_MESSAGE(std::isfinite(j.get<double>()), path);
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items()) check_finite(v, path + "." + k);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) check_finite(j[i], path + "[" + std::to_string(i) + "]");
    }
}

json without_timings(json report) {
    report.erase("timings");
    auto& vel = report["sections"]["velocity"];
    if (vel.is_object()) vel.erase("scalability");
    return report;
}

}  // namespace

TEST_CASE("csv minimal file") {
    const Dataset d = parse("x0,y\n1.5,2.0");
    CHECK(d.rows() == 1);
    CHECK(d.dim() == 1);
    CHECK(d.features(0, 0) == 1.5);
    CHECK(d.target(0) == 2.0);
    CHECK(parse("\xEF\xBB\xBFx0,x1,y\r\n1,2,3\r\n\r\n4,5,6\n").rows() == 2);
}

TEST_CASE("csv round trip is bit exact") {
    const Dataset d = random_dataset(100, 5, 17);
    std::ostringstream out;
    write_csv(d, out);
    const Dataset back = parse(out.str());
    CHECK(back.features == d.features);
    CHECK(back.target == d.target);

    Matrix awkward(3, 2);
    awkward << 1e-300, -0.1, 1.0 / 3.0, 123456789.123456789, -5e300, 2.0;
    const Dataset a = make_dataset(awkward, Vector::Constant(3, 0.1 + 0.2));
    const auto path = std::filesystem::temp_directory_path() / "enfo_csv_roundtrip.csv";
    write_csv(a, path);
    const Dataset b = read_csv(path);
    std::filesystem::remove(path);
    CHECK(b.features == a.features);
    CHECK(b.target == a.target);
}

TEST_CASE("csv errors name the line") {
    CHECK(error_of("x0,y\nabc,1\n").find("line 2") != std::string::npos);
    CHECK(error_of("x0,y\n1,2\n3\n").find("line 3") != std::string::npos);
    CHECK(error_of("x0,y\n1,2,3\n").find("line 2") != std::string::npos);
    CHECK(error_of("x0,y\n1,2x\n").find("line 2") != std::string::npos);
    CHECK(error_of("x0,y\nnan,1\n").find("line 2") != std::string::npos);
    CHECK(error_of("x0,target\n1,2\n").find("line 1") != std::string::npos);
    CHECK(error_of("a,y\n1,2\n").find("line 1") != std::string::npos);
    CHECK(error_of("x0,x2,y\n1,2,3\n").find("line 1") != std::string::npos);
    CHECK(!error_of("x0,y\n").empty());
    CHECK(!error_of("").empty());
    CHECK_THROWS_AS(read_csv("/nonexistent/enfo.csv"), InputError);
}

TEST_CASE("experiment config JSON round trip and validation") {
    ExperimentConfig c = tiny_config();
    c.key.bandwidth = 0.731;
    c.task.kind = TaskKind::clv;
    const json j = to_json(c);
    CHECK(j.at("schema_version") == kExperimentSchemaVersion);
    const ExperimentConfig back = experiment_config_from_json(j);
    CHECK(to_json(back) == j);

    CHECK(to_json(experiment_config_from_json(json::object())) == to_json(ExperimentConfig{}));

    json bad = j;
    bad["sweeps"]["mm"] = {1};
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);
    bad = j;
    bad["extra"] = 1;
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);
    bad = j;
    bad["repeats"] = 0;
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);
    bad = j;
    bad["sweeps"]["m"] = json::array();
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);
    bad = j;
    bad["sections"] = {"specificity", "nonsense"};
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);
    bad = j;
    bad["schema_version"] = 99;
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);
    bad = j;
    bad["repeats"] = "three";
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);
    bad = j;
    bad["task"]["kind"] = "mnist";
    CHECK_THROWS_AS(experiment_config_from_json(bad), InputError);

    // Unused sweeps may be empty.
    ExperimentConfig only_privacy = tiny_config();
    only_privacy.sections = {"privacy"};
    only_privacy.sweeps.lambda.clear();
    only_privacy.sweeps.beta.clear();
    CHECK_NOTHROW(validate(only_privacy));
    CHECK(task_kind_from_string("csv_path") == TaskKind::csv);
}

TEST_CASE("prepared task splits and resolved key") {
    const ExperimentConfig c = tiny_config();
    const PreparedTask t = prepare_task(c);
    CHECK(t.train.rows() == 240);
    CHECK(t.test.rows() == 150);
    CHECK(t.user.rows() == 60);
    CHECK(t.iterations >= 1);
    CHECK(t.iterations <= 40);
    CHECK(t.kernel.bandwidth > 0.0);
    CHECK(t.full_data_rmse > 0.0);
    // The training rows do not depend on how many test/user rows follow.
    ExperimentConfig more = c;
    more.task.n_test = 300;
    more.key.iterations = t.iterations;
    more.key.bandwidth = t.kernel.bandwidth;
    const PreparedTask t2 = prepare_task(more);
    CHECK(t2.train.features == t.train.features);
}

TEST_CASE("context evaluations are deterministic and degenerate cases hold") {
    ExperimentConfig c = tiny_config();
    ExperimentContext ctx(c);
    const auto& synth = ctx.forged(15, 0.0, 0.0, 0).data;
    CHECK(&ctx.forged(15, 0.0, 0.0, 0).data == &synth);
    CHECK(ctx.designated_rmse(synth) == ctx.designated_rmse(synth));
    CHECK(ctx.krr_rmse(synth, 1) == ctx.krr_rmse(synth, 1));

    // augmentation_size = 0 leaves the RMSE unchanged.
    c.augmentation_size = 0;
    c.sweeps.lambda = {0.0};
    ExperimentContext no_aug(c, ctx.task());
    const json aug = run_augmentation(no_aug);
    for (const auto& cell : aug["cells"]) CHECK(cell["augmented_rmse"] == cell["designated_rmse"]);

    // M = N with lr = 0 is the subsample baseline.
    ExperimentConfig full = tiny_config();
    full.sweeps.m = {240};
    full.forge.learning_rate = 0.0;
    full.repeats = 2;
    ExperimentContext full_ctx(full, ctx.task());
    const json vol = run_volume_sweep(full_ctx);
    for (const auto& cell : vol["cells"]) CHECK(cell["forged_mean"] == cell["subsample_mean"]);
}

TEST_CASE("benchmark report covers every section and reruns from its echo") {
    ExperimentConfig c = tiny_config();
    const auto dir = std::filesystem::temp_directory_path() / "enfo_harness_bench";
    std::filesystem::remove_all(dir);
    c.output_dir = dir.string();
    const json report = run_benchmark(c, true);
    for (const char* key : {"designated_rmse", "krr_rmse", "svr_rmse", "mcaa", "augmented_rmse", "stability"}) {
        CHECK_MESSAGE(report.at(key).is_number(), key);
    }
    for (const char* s : {"specificity", "augmentation", "privacy", "volume", "velocity"}) {
        CHECK_MESSAGE(report["sections"].contains(s), s);
    }
    check_finite(report, "report");
    CHECK(report["mcaa"].get<double>() >= 0.0);
    CHECK(report["mcaa"].get<double>() <= 1.0);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "velocity.csv"));
    CHECK(std::filesystem::exists(dir / "alignment.csv"));

    const json& echo = report["config_echo"];
    CHECK(echo["key"]["iterations"].is_number_integer());
    CHECK(echo["key"]["bandwidth"].is_number_float());
    const json rerun = run_benchmark(experiment_config_from_json(echo), false);
    CHECK(without_timings(rerun) == without_timings(report));
    std::filesystem::remove_all(dir);
}
