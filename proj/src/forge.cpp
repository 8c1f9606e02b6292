#include "enfo/forge.hpp"

#include "enfo/error.hpp"
#include "enfo/model_io.hpp"
#include "enfo/nu_method.hpp"
#include "enfo/rng.hpp"
#include "enfo/sinkhorn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

namespace enfo {

using nlohmann::json;

void validate(const ForgeConfig& c) {
    require(c.m >= 1, "m must be >= 1");
    require(c.batch_size >= 1, "batch_size must be >= 1");
    require(c.epochs >= 1, "epochs must be >= 1");
    require(c.lambda_align >= 0.0 && std::isfinite(c.lambda_align), "lambda_align must be >= 0");
    require(c.beta_adapt >= 0.0 && std::isfinite(c.beta_adapt), "beta_adapt must be >= 0");
    require(c.sinkhorn_blur > 0.0, "sinkhorn_blur must be positive");
    require(c.sinkhorn_iters >= 1, "sinkhorn_iters must be >= 1");
    validate(adam_settings(c));
}

AdamSettings adam_settings(const ForgeConfig& c) {
    return AdamSettings{c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon};
}

json to_json(const ForgeConfig& c) {
    return json{{"m", c.m},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_epsilon", c.adam_epsilon},
                {"lambda_align", c.lambda_align},
                {"beta_adapt", c.beta_adapt},
                {"sinkhorn_blur", c.sinkhorn_blur},
                {"sinkhorn_iters", c.sinkhorn_iters},
                {"seed", c.seed}};
}

ForgeConfig forge_config_from_json(const json& j) {
    require(j.is_object(), "forge config must be a JSON object");
    ForgeConfig c;
    const std::set<std::string> known{"m",          "batch_size",   "epochs",
                                      "learning_rate", "adam_beta1", "adam_beta2",
                                      "adam_epsilon", "lambda_align", "beta_adapt",
                                      "sinkhorn_blur", "sinkhorn_iters", "seed"};
    for (const auto& [key, _] : j.items()) {
        require(known.count(key) == 1, "unknown forge config key '" + key + "'");
    }
    try {
        c.m = j.value("m", c.m);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        c.lambda_align = j.value("lambda_align", c.lambda_align);
        c.beta_adapt = j.value("beta_adapt", c.beta_adapt);
        c.sinkhorn_blur = j.value("sinkhorn_blur", c.sinkhorn_blur);
        c.sinkhorn_iters = j.value("sinkhorn_iters", c.sinkhorn_iters);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed forge config: ") + e.what());
    }
    return c;
}

json to_json(const ForgeProvenance& p) {
    json j{{"source_hash", p.source_hash},
           {"config_hash", p.config_hash},
           {"epochs_run", p.epochs_run},
           {"final_loss", p.final_loss},
           {"initial_loss", p.initial_loss},
           {"best_epoch", p.best_epoch},
           {"steps", p.steps},
           {"rejected_steps", p.rejected_steps},
           {"mean_step_ms", p.mean_step_ms},
           {"kernel", {{"family", to_string(p.kernel.family)}, {"bandwidth", p.kernel.bandwidth}}},
           {"nu", p.nu},
           {"iterations", p.iterations}};
    j["standardization"] = p.standardization ? to_json(*p.standardization) : json(nullptr);
    return j;
}

ForgeProvenance forge_provenance_from_json(const json& j) {
    try {
        ForgeProvenance p;
        p.source_hash = j.at("source_hash").get<std::string>();
        p.config_hash = j.at("config_hash").get<std::string>();
        p.epochs_run = j.at("epochs_run").get<int>();
        p.final_loss = j.at("final_loss").get<double>();
        p.initial_loss = j.value("initial_loss", 0.0);
        p.best_epoch = j.value("best_epoch", 0);
        p.steps = j.value("steps", std::int64_t{0});
        p.rejected_steps = j.value("rejected_steps", std::int64_t{0});
        p.mean_step_ms = j.value("mean_step_ms", 0.0);
        p.kernel.family = kernel_family_from_string(j.at("kernel").at("family").get<std::string>());
        p.kernel.bandwidth = j.at("kernel").at("bandwidth").get<double>();
        p.nu = j.at("nu").get<double>();
        p.iterations = j.at("iterations").get<int>();
        if (j.contains("standardization") && !j.at("standardization").is_null()) {
            p.standardization = standardization_from_json(j.at("standardization"));
        }
        return p;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed provenance JSON: ") + e.what());
    }
}

namespace {

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

std::vector<Index> sample_without_replacement(Index n, Index m, std::uint64_t seed) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto rng = make_rng(seed, 0x696e6974ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(m));
    return idx;
}

ObjectiveTerms terms_of(const ForgeConfig& c) {
    return ObjectiveTerms{c.lambda_align, c.beta_adapt, c.sinkhorn_blur, c.sinkhorn_iters};
}

// Full-data composite loss with the alignment reference fixed once per run.
class FullDataLoss {
public:
    FullDataLoss(const Dataset& data, const KernelSpec& kernel, double nu, int iterations,
                 const ForgeConfig& config)
        : data_(data), kernel_(kernel), nu_(nu), iterations_(iterations), terms_(terms_of(config)) {
        if (terms_.lambda_align > 0.0) {
            const Index r = std::min(data.rows(), kAlignmentReferenceRows);
            reference_ = joint_rows(
                select_rows(data, sample_without_replacement(data.rows(), r, config.seed ^ 0x726566ULL)));
        }
    }

    double operator()(const Dataset& synth) const {
        const Matrix gram = kernel_matrix(kernel_, synth.features);
        const Vector alpha = nu_method_alpha(gram, synth.target, nu_, iterations_);
        constexpr Index kChunk = 8192;
        double sse = 0.0;
        for (Index start = 0; start < data_.rows(); start += kChunk) {
            const Index len = std::min(kChunk, data_.rows() - start);
            const Matrix cross =
                kernel_matrix(kernel_, data_.features.middleRows(start, len), synth.features);
            sse += (cross * alpha - data_.target.segment(start, len)).squaredNorm();
        }
        double loss = sse / static_cast<double>(data_.rows());
        if (terms_.beta_adapt > 0.0) {
            loss += terms_.beta_adapt * (gram * alpha - synth.target).squaredNorm() /
                    static_cast<double>(synth.rows());
        }
        if (terms_.lambda_align > 0.0) {
            loss += terms_.lambda_align *
                    sinkhorn_divergence(joint_rows(synth), reference_, terms_.sinkhorn_blur,
                                        terms_.sinkhorn_iters)
                        .value;
        }
        return loss;
    }

private:
    const Dataset& data_;
    KernelSpec kernel_;
    double nu_;
    int iterations_;
    ObjectiveTerms terms_;
    Matrix reference_;
};

// Shared optimization loop. `data` and `synth` are in forging space.
struct LoopOutcome {
    Dataset best;
    bool best_is_start = true;
    double initial_loss = 0.0;
    double best_loss = 0.0;
    int best_epoch = 0;
    std::int64_t steps = 0;
    std::int64_t rejected = 0;
    double step_ms_total = 0.0;
};

LoopOutcome run_loop(const Dataset& data, Dataset synth, const KernelSpec& kernel, double nu,
                     int iterations, const ForgeConfig& config, int epochs, int epoch_offset,
                     const ForgeOptions& options) {
    const ObjectiveTerms terms = terms_of(config);
    const AdamSettings settings = adam_settings(config);
    const Index n_params = synth.rows() * (synth.dim() + 1);

    AdamState state = AdamState::zeros(n_params);
    if (options.adam_state != nullptr && options.adam_state->first_moment.size() == n_params) {
        state = *options.adam_state;
    }

    const FullDataLoss full_loss(data, kernel, nu, iterations, config);
    LoopOutcome out;
    out.initial_loss = full_loss(synth);
    if (!std::isfinite(out.initial_loss)) {
        throw NumericalError("non-finite composite loss at initialization");
    }
    out.best = synth;
    out.best_loss = out.initial_loss;
    out.best_epoch = epoch_offset;

    Vector params = flatten_params(synth);
    std::vector<Index> order(static_cast<std::size_t>(data.rows()));
    for (int e = 1; e <= epochs; ++e) {
        const int epoch = epoch_offset + e;
        std::iota(order.begin(), order.end(), Index{0});
        auto rng = make_rng(config.seed, static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const Dataset batch =
                select_rows(data, std::vector<Index>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                     order.begin() + static_cast<std::ptrdiff_t>(stop)));
            const auto t0 = std::chrono::steady_clock::now();
            const ObjectiveValue obj =
                forge_objective(synth, batch, kernel, nu, iterations, terms, true);
            if (!std::isfinite(obj.total)) {
                std::ostringstream msg;
                msg << "non-finite batch loss at epoch " << epoch << ", step " << out.steps + 1
                    << " (validation=" << obj.validation << ", alignment=" << obj.alignment
                    << ", training=" << obj.training_error << ")";
                throw NumericalError(msg.str());
            }
            Vector grad(n_params);
            const Index w = synth.dim() + 1;
            for (Index j = 0; j < synth.rows(); ++j) {
                grad.segment(j * w, synth.dim()) = obj.gradient->features.row(j).transpose();
                grad(j * w + synth.dim()) = obj.gradient->target(j);
            }
            AdamUpdate upd = adam_step(state, params, grad, settings);
            if (upd.accepted) {
                params = std::move(upd.params);
                state = std::move(upd.state);
                unflatten_params(params, synth);
            } else {
                ++out.rejected;
            }
            ++out.steps;
            out.step_ms_total +=
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
        }

        const double loss = full_loss(synth);
        if (!std::isfinite(loss)) {
            throw NumericalError("non-finite composite loss after epoch " + std::to_string(epoch));
        }
        if (loss < out.best_loss) {
            out.best = synth;
            out.best_loss = loss;
            out.best_epoch = epoch;
            out.best_is_start = false;
        }
        if (options.on_epoch) options.on_epoch(EpochReport{epoch, loss, &synth});
    }
    if (options.adam_state != nullptr) *options.adam_state = state;
    return out;
}

ForgeProvenance make_provenance(const Dataset& source, const ForgeConfig& config,
                                const KernelSpec& kernel, double nu, int iterations,
                                const std::optional<Standardization>& s, const LoopOutcome& loop,
                                int epochs_run) {
    ForgeProvenance p;
    p.source_hash = hash_dataset(source);
    const std::string cfg = to_json(config).dump();
    p.config_hash = hex64(fnv1a(cfg.data(), cfg.size()));
    p.epochs_run = epochs_run;
    p.final_loss = loop.best_loss;
    p.initial_loss = loop.initial_loss;
    p.best_epoch = loop.best_epoch;
    p.steps = loop.steps;
    p.rejected_steps = loop.rejected;
    p.mean_step_ms = loop.steps > 0 ? loop.step_ms_total / static_cast<double>(loop.steps) : 0.0;
    p.kernel = kernel;
    p.nu = nu;
    p.iterations = iterations;
    p.standardization = s;
    return p;
}

}  // namespace

std::string hash_dataset(const Dataset& data) {
    std::uint64_t h = fnv1a(data.features.data(),
                            static_cast<std::size_t>(data.features.size()) * sizeof(double));
    h = fnv1a(data.target.data(), static_cast<std::size_t>(data.target.size()) * sizeof(double), h);
    return hex64(h);
}

SyntheticDataset init_synthetic(const Dataset& data, int m, std::uint64_t seed) {
    validate(data);
    require(m >= 1, "synthetic size m must be >= 1");
    require(m <= data.rows(), "synthetic size m=" + std::to_string(m) +
                                  " exceeds the number of original rows " +
                                  std::to_string(data.rows()));
    SyntheticDataset out;
    out.data = select_rows(data, sample_without_replacement(data.rows(), m, seed));
    out.provenance.source_hash = hash_dataset(data);
    return out;
}

Vector flatten_params(const Dataset& synth) {
    const Index w = synth.dim() + 1;
    Vector p(synth.rows() * w);
    for (Index j = 0; j < synth.rows(); ++j) {
        p.segment(j * w, synth.dim()) = synth.features.row(j).transpose();
        p(j * w + synth.dim()) = synth.target(j);
    }
    return p;
}

void unflatten_params(const Vector& params, Dataset& synth) {
    const Index w = synth.dim() + 1;
    require(params.size() == synth.rows() * w, "parameter vector has the wrong length");
    for (Index j = 0; j < synth.rows(); ++j) {
        synth.features.row(j) = params.segment(j * w, synth.dim()).transpose();
        synth.target(j) = params(j * w + synth.dim());
    }
}

ObjectiveValue forge_objective(const Dataset& synth, const Dataset& batch,
                               const KernelSpec& kernel, double nu, int iterations,
                               const ObjectiveTerms& terms, bool want_gradient) {
    require(batch.rows() >= 1, "batch must be non-empty");
    require(synth.rows() >= 1, "synthetic set must be non-empty");
    require(batch.dim() == synth.dim(), "batch and synthetic widths differ");
    require(iterations >= 1, "iterations must be >= 1");
    validate(kernel);

    const Index m = synth.rows();
    const Index b = batch.rows();
    const double inv_m = 1.0 / static_cast<double>(m);
    const Matrix& xs = synth.features;
    const Vector& ys = synth.target;

    // Forward: unrolled recursion, keeping alpha^0..alpha^T for the reverse pass.
    const Matrix gram = kernel_matrix(kernel, xs);
    Matrix trajectory(m, want_gradient ? iterations + 1 : 1);
    trajectory.col(0).setZero();
    Vector prev = Vector::Zero(m);
    Vector cur = Vector::Zero(m);
    Vector next(m);
    Vector scratch(m);
    for (int t = 1; t <= iterations; ++t) {
        const NuCoefficients c = nu_coefficients(nu, t);
        scratch.noalias() = gram * cur;
        next = cur + c.momentum * (cur - prev) + (c.step * inv_m) * (ys - scratch);
        prev.swap(cur);
        cur.swap(next);
        if (want_gradient) trajectory.col(t) = cur;
    }
    const Vector& alpha = cur;

    const Matrix cross = kernel_matrix(kernel, batch.features, xs);
    const Vector residual = cross * alpha - batch.target;

    ObjectiveValue out;
    out.validation = residual.squaredNorm() / static_cast<double>(b);
    Vector fit_residual;
    if (terms.beta_adapt > 0.0) {
        fit_residual = gram * alpha - ys;
        out.training_error = fit_residual.squaredNorm() * inv_m;
    }
    std::optional<SinkhornResult> sink;
    if (terms.lambda_align > 0.0) {
        sink = sinkhorn_divergence(joint_rows(synth), joint_rows(batch), terms.sinkhorn_blur,
                                   terms.sinkhorn_iters);
        out.alignment = sink->value;
    }
    out.total = out.validation + terms.beta_adapt * out.training_error +
                terms.lambda_align * out.alignment;
    if (!want_gradient) return out;

    // Reverse pass.
    const Vector g_pred = (2.0 / static_cast<double>(b)) * residual;
    Vector g_alpha = cross.transpose() * g_pred;
    Vector g_target = Vector::Zero(m);
    Matrix g_gram = Matrix::Zero(m, m);
    if (terms.beta_adapt > 0.0) {
        const Vector g_fit = (2.0 * terms.beta_adapt * inv_m) * fit_residual;
        g_alpha.noalias() += gram * g_fit;
        g_gram.noalias() += g_fit * alpha.transpose();
        g_target -= g_fit;
    }

    // bar holds the complete adjoint of alpha^t; pending the partial adjoint
    // of alpha^{t-1} (its contribution from step t+1).
    Vector bar = g_alpha;
    Vector pending = Vector::Zero(m);
    Matrix step_adjoints(m, iterations);
    for (int t = iterations; t >= 1; --t) {
        const NuCoefficients c = nu_coefficients(nu, t);
        const double s = c.step * inv_m;
        step_adjoints.col(t - 1) = -s * bar;
        g_target += s * bar;
        scratch.noalias() = gram * bar;
        Vector complete = pending + (1.0 + c.momentum) * bar - s * scratch;
        pending = -c.momentum * bar;
        bar.swap(complete);
    }
    g_gram.noalias() += step_adjoints * trajectory.leftCols(iterations).transpose();

    const double inv_h2 = 1.0 / (kernel.bandwidth * kernel.bandwidth);
    // d K(x_i, x_j) / d x_i = K_ij (x_j - x_i) / h^2, for both arguments of the Gram.
    const Matrix sym = (g_gram + g_gram.transpose()).cwiseProduct(gram);
    Matrix g_x = sym * xs - sym.rowwise().sum().asDiagonal() * xs;
    // Cross kernel: d K(x_b, xs_j) / d xs_j = K_bj (x_b - xs_j) / h^2.
    const Matrix pc = (g_pred * alpha.transpose()).cwiseProduct(cross);
    g_x.noalias() += pc.transpose() * batch.features;
    g_x -= pc.colwise().sum().transpose().asDiagonal() * xs;
    g_x *= inv_h2;

    if (sink) {
        g_x += terms.lambda_align * sink->gradient.leftCols(synth.dim());
        g_target += terms.lambda_align * sink->gradient.col(synth.dim());
    }
    out.gradient = ForgeGradient{std::move(g_x), std::move(g_target)};
    return out;
}

double batch_loss(const Dataset& synth, const Dataset& batch, const KernelSpec& kernel, double nu,
                  int iterations) {
    return forge_objective(synth, batch, kernel, nu, iterations, ObjectiveTerms{}, false).validation;
}

ForgeGradient forge_gradient(const Dataset& synth, const Dataset& batch, const KernelSpec& kernel,
                             double nu, int iterations) {
    return *forge_objective(synth, batch, kernel, nu, iterations, ObjectiveTerms{}, true).gradient;
}

double full_data_loss(const Dataset& synth, const Dataset& data, const KernelSpec& kernel,
                      double nu, int iterations, const ForgeConfig& config) {
    return FullDataLoss(data, kernel, nu, iterations, config)(synth);
}

SyntheticDataset forge(const Dataset& data, const KernelSpec& kernel, double nu, int iterations,
                       const ForgeConfig& config, const ForgeOptions& options) {
    validate(data);
    validate(kernel);
    validate(config);
    require(iterations >= 1, "iterations must be >= 1");

    Dataset data_std;
    Dataset init_original;
    Dataset init_std;
    Standardization s;
    if (data.standardization) {
        s = *data.standardization;
        data_std = data;
        init_std = init_synthetic(data, config.m, config.seed).data;
    } else {
        s = options.standardization ? *options.standardization : fit_standardization(data);
        data_std = standardize(data, s);
        init_original = init_synthetic(data, config.m, config.seed).data;
        init_std = standardize(init_original, s);
    }

    const LoopOutcome loop =
        run_loop(data_std, init_std, kernel, nu, iterations, config, config.epochs, 0, options);

    SyntheticDataset out;
    // An unimproved run hands back the sampled rows untouched.
    out.data = (loop.best_is_start && !data.standardization) ? init_original
                                                              : destandardize(loop.best);
    out.provenance =
        make_provenance(data, config, kernel, nu, iterations, s, loop, config.epochs);
    return out;
}

SyntheticDataset forge_streaming(const SyntheticDataset& existing, const Dataset& new_data,
                                 const Dataset& old_data, const KernelSpec& kernel, double nu,
                                 int iterations, const ForgeConfig& config,
                                 const ForgeOptions& options) {
    const ForgeProvenance& prev = existing.provenance;
    require(prev.kernel.family == kernel.family && prev.kernel.bandwidth == kernel.bandwidth &&
                prev.nu == nu && prev.iterations == iterations,
            "streaming parameters (kernel, nu, iterations) differ from the existing provenance");
    require(prev.standardization.has_value(), "existing synthetic set records no forging space");
    require(config.epochs >= 0, "epochs must be >= 0");
    ForgeConfig checked = config;
    checked.epochs = std::max(1, config.epochs);
    validate(checked);
    if (config.epochs == 0) return existing;
    validate(existing.data);
    validate(old_data);
    require(old_data.dim() == existing.data.dim(), "old data width differs from synthetic width");
    require(new_data.rows() == 0 || new_data.dim() == existing.data.dim(),
            "new data width differs from synthetic width");
    require(!old_data.standardization && !new_data.standardization,
            "streaming expects data in original units");

    const Standardization& s = *prev.standardization;
    const Dataset combined = new_data.rows() > 0 ? concat(old_data, new_data) : old_data;
    const Dataset data_std = standardize(combined, s);
    const Dataset synth_std = standardize(existing.data, s);

    const LoopOutcome loop = run_loop(data_std, synth_std, kernel, nu, iterations, config,
                                      config.epochs, prev.epochs_run, options);
    SyntheticDataset out;
    out.data = loop.best_is_start ? existing.data : destandardize(loop.best);
    out.provenance = make_provenance(combined, config, kernel, nu, iterations, s, loop,
                                     prev.epochs_run + config.epochs);
    return out;
}

}  // namespace enfo
