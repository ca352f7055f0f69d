#pragma once

// Replicated benchmark experiments: generate datasets, run each weighting
// method, aggregate bias / RMSE with bootstrap intervals, emit tables.

#include <advbal/adversarial.hpp>
#include <advbal/baselines.hpp>
#include <advbal/benchgen.hpp>
#include <advbal/csv.hpp>
#include <advbal/diagnostics.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace advbal {

// ---------------------------------------------------------------------------
// Methods and configuration

struct MethodSpec {
    enum class Kind { Unweighted, Ipw, MmdV1, Adversarial };
    Kind kind = Kind::Unweighted;
    FamilyChoice family = FamilySpec::logistic();
    std::string label = "unweighted";
};

inline std::vector<FamilySpec> default_cv_candidates() {
    return {FamilySpec::logistic(), FamilySpec::kernel_rbf(), FamilySpec::mlp(1), FamilySpec::mlp(2),
            FamilySpec::mlp(3)};
}

// Family names: lr, kernel, stump, mlp1..mlp3, mlp (depth chosen by CV) and
// cv (LR / kernel / MLP chosen by CV).
inline FamilyChoice parse_family(const std::string& name) {
    if (name == "lr") return FamilySpec::logistic();
    if (name == "kernel") return FamilySpec::kernel_rbf();
    if (name == "stump") return FamilySpec::stump();
    if (name == "mlp1") return FamilySpec::mlp(1);
    if (name == "mlp2") return FamilySpec::mlp(2);
    if (name == "mlp3") return FamilySpec::mlp(3);
    if (name == "mlp") return CvSelect{{FamilySpec::mlp(1), FamilySpec::mlp(2), FamilySpec::mlp(3)}, 5};
    if (name == "cv") return CvSelect{default_cv_candidates(), 5};
    throw InvalidInput("unknown classifier family '" + name + "'");
}

// "unweighted", "mmd_v1", "ipw:<family>", "adversarial:<family>".
inline MethodSpec parse_method(const std::string& text) {
    MethodSpec m;
    m.label = text;
    if (text == "unweighted") return m;
    if (text == "mmd_v1") {
        m.kind = MethodSpec::Kind::MmdV1;
        return m;
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string fam = colon == std::string::npos ? "lr" : text.substr(colon + 1);
    if (head == "ipw") {
        m.kind = MethodSpec::Kind::Ipw;
    } else if (head == "adversarial") {
        m.kind = MethodSpec::Kind::Adversarial;
    } else {
        throw InvalidInput("unknown method '" + text + "'");
    }
    m.family = parse_family(fam);
    m.label = head + ":" + fam;
    return m;
}

struct ExperimentConfig {
    std::string benchmark = "circular";  // kang_schafer, circular or csv
    bool transformed = false;            // kang_schafer only
    // csv benchmark
    std::string csv_path;
    CsvSchema schema;
    Estimand estimand = Estimand::ate();
    std::optional<double> truth;

    std::vector<std::size_t> sizes = {500};
    int replications = 100;
    std::vector<std::string> methods = {"unweighted", "adversarial:lr"};
    std::uint64_t seed = 0;
    int bootstrap_samples = 1000;
    double ci_level = 0.95;
    int n_iter = 20;
    PredictionMode prediction_mode;
    double mmd_scale = 1.0;
    double mmd_ridge = 1e-6;
    double mmd_tol = 1e-8;
    int mmd_max_iter = 10000;
    std::string diagnostic_family = "lr";
    int workers = 0;  // 0: ADVBAL_WORKERS, else hardware concurrency
    std::string output;
    std::string format = "csv";

    void validate() const {
        if (benchmark != "kang_schafer" && benchmark != "circular" && benchmark != "csv") {
            throw InvalidInput("config: unknown benchmark '" + benchmark + "'");
        }
        if (benchmark == "csv" && csv_path.empty()) throw InvalidInput("config: csv benchmark needs csv_path");
        if (replications < 1) throw InvalidInput("config: replications must be at least 1");
        if (benchmark != "csv" && sizes.empty()) throw InvalidInput("config: sizes must be nonempty");
        if (methods.empty()) throw InvalidInput("config: at least one method is required");
        if (bootstrap_samples < 1) throw InvalidInput("config: bootstrap_samples must be positive");
        if (!(ci_level > 0.0 && ci_level < 1.0)) throw InvalidInput("config: ci_level must lie in (0, 1)");
        if (n_iter < 1) throw InvalidInput("config: n_iter must be at least 1");
        if (format != "csv" && format != "json") throw InvalidInput("config: format must be csv or json");
        for (const auto& m : methods) parse_method(m);
        if (!std::holds_alternative<FamilySpec>(parse_family(diagnostic_family))) {
            throw InvalidInput("config: diagnostic_family must be a single family");
        }
    }
};

inline std::string estimand_name(const Estimand& e) {
    switch (e.kind) {
    case Estimand::Kind::ExpectedPotentialOutcome: return "epo:" + std::to_string(e.level);
    case Estimand::Kind::ATE: return "ate";
    case Estimand::Kind::ATT: return "att:" + std::to_string(e.level);
    }
    return "ate";
}

// "ate", "epo:<a>", "att:<reference>"; a bare "epo" / "att" means arm 1.
inline Estimand parse_estimand(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    int level = 1;
    if (colon != std::string::npos) {
        try {
            level = std::stoi(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw InvalidInput("bad estimand '" + text + "'");
        }
    }
    if (head == "ate") return Estimand::ate();
    if (head == "epo") return Estimand::expected_potential_outcome(level);
    if (head == "att") return Estimand::att(level);
    throw InvalidInput("unknown estimand '" + text + "'");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.benchmark = j.value("benchmark", c.benchmark);
        c.transformed = j.value("transformed", c.transformed);
        c.csv_path = j.value("csv_path", c.csv_path);
        c.schema.treatment_column = j.value("treatment_column", c.schema.treatment_column);
        c.schema.outcome_column = j.value("outcome_column", c.schema.outcome_column);
        c.schema.covariate_columns = j.value("covariate_columns", c.schema.covariate_columns);
        if (j.contains("estimand")) c.estimand = parse_estimand(j.at("estimand").get<std::string>());
        if (j.contains("truth") && !j.at("truth").is_null()) c.truth = j.at("truth").get<double>();
        c.sizes = j.value("sizes", c.sizes);
        c.replications = j.value("replications", c.replications);
        c.methods = j.value("methods", c.methods);
        c.seed = j.value("seed", c.seed);
        c.bootstrap_samples = j.value("bootstrap_samples", c.bootstrap_samples);
        c.ci_level = j.value("ci_level", c.ci_level);
        c.n_iter = j.value("n_iter", c.n_iter);
        if (j.contains("prediction_mode")) {
            const auto mode = j.at("prediction_mode").get<std::string>();
            if (mode == "train") {
                c.prediction_mode = PredictionMode::train();
            } else if (mode == "kfold") {
                c.prediction_mode = PredictionMode::cross_fit(j.value("kfold_k", 5));
            } else {
                throw InvalidInput("config: prediction_mode must be train or kfold");
            }
        }
        c.mmd_scale = j.value("mmd_scale", c.mmd_scale);
        c.mmd_ridge = j.value("mmd_ridge", c.mmd_ridge);
        c.mmd_tol = j.value("mmd_tol", c.mmd_tol);
        c.mmd_max_iter = j.value("mmd_max_iter", c.mmd_max_iter);
        c.diagnostic_family = j.value("diagnostic_family", c.diagnostic_family);
        c.workers = j.value("workers", c.workers);
        c.output = j.value("output", c.output);
        c.format = j.value("format", c.format);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Aggregation

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Percentile bootstrap interval for the mean.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int resamples, double level,
                                              std::uint64_t seed) {
    if (values.size() < 2) throw InvalidInput("bootstrap_ci: need at least 2 values");
    if (resamples < 1) throw InvalidInput("bootstrap_ci: resamples must be positive");
    if (!(level > 0.0 && level < 1.0)) throw InvalidInput("bootstrap_ci: level must lie in (0, 1)");
    RngStream rng(seed);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += values[static_cast<std::size_t>(rng.below(values.size()))];
        m = s / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    const double tail = 0.5 * (1.0 - level);
    return {quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
}

struct ReplicationOutcome {
    std::optional<double> estimate;
    double h_divergence = 0.0;
    double ess = 0.0;
    std::string error;
};

struct MethodSizeResult {
    std::string method;
    std::size_t n = 0;
    std::vector<ReplicationOutcome> replications;
    // Aggregates over successful replications; bias, rmse and the interval
    // are relative to the truth and absent when no truth is known.
    std::optional<double> bias;
    std::optional<double> rmse;
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
    double mean_estimate = 0.0;
    double mean_h_divergence = 0.0;
    double mean_ess = 0.0;
    int n_failures = 0;
    bool failed = false;
};

struct ExperimentResult {
    std::optional<double> truth;
    std::vector<MethodSizeResult> rows;  // method (config order), then n ascending
};

// ---------------------------------------------------------------------------
// One replication

struct ReplicationContext {
    const ExperimentConfig* cfg = nullptr;
    FamilySpec diagnostic;
    std::uint64_t seed = 0;
};

struct ArmResult {
    double estimate = 0.0;
    double h_divergence = 0.0;
    double ess = 0.0;
};

inline WeightVector method_weights(const MethodSpec& method, const Dataset& ds, const BalancingProblem& prob,
                                   const Estimand& estimand, int arm, const ReplicationContext& ctx) {
    switch (method.kind) {
    case MethodSpec::Kind::Unweighted: return WeightVector::uniform(prob.n());
    case MethodSpec::Kind::Ipw: {
        FamilySpec family;
        if (const auto* spec = std::get_if<FamilySpec>(&method.family)) {
            family = *spec;
        } else {
            const auto& cv = std::get<CvSelect>(method.family);
            std::vector<int> labels(ds.rows());
            for (std::size_t i = 0; i < ds.rows(); ++i) labels[i] = ds.treatment()[i] == arm ? 1 : 0;
            family = cross_val_select(cv.candidates, ds.covariates(), labels,
                                      Vector::Ones(static_cast<Eigen::Index>(ds.rows())), cv.k, ctx.seed)
                         .family;
        }
        return ipw_weights(ds, family, estimand, arm, ctx.seed).weights;
    }
    case MethodSpec::Kind::MmdV1:
        return mmd_weights(prob, ctx.cfg->mmd_scale, ctx.cfg->mmd_ridge, ctx.cfg->mmd_tol, ctx.cfg->mmd_max_iter)
            .weights;
    case MethodSpec::Kind::Adversarial: {
        AdversarialParams params;
        params.n_iter = ctx.cfg->n_iter;
        params.prediction_mode = ctx.cfg->prediction_mode;
        params.family = method.family;
        params.seed = ctx.seed;
        return adversarial_balance(prob, params).weights;
    }
    }
    throw InvalidInput("unknown method");
}

inline ArmResult balance_arm(const MethodSpec& method, const Dataset& ds, const Estimand& estimand, int arm,
                             const ReplicationContext& ctx) {
    const auto prob = build_balancing_problem(ds, estimand, arm);
    const auto w = method_weights(method, ds, prob, estimand, arm, ctx);
    const Vector y = outcomes_for_rows(ds, prob.source_rows());
    ArmResult r;
    r.estimate = weighted_outcome_estimate(w, y);
    r.h_divergence = h_divergence(prob, w, ctx.diagnostic, ctx.cfg->prediction_mode, mix_seed(ctx.seed, 0xD1A6));
    r.ess = effective_sample_size(w);
    return r;
}

// ATE composes two arm-vs-full-sample runs; ATT compares the unweighted
// reference arm with the reweighted other arm.
inline ReplicationOutcome run_method(const MethodSpec& method, const Dataset& ds, const Estimand& estimand,
                                     const ReplicationContext& ctx) {
    ReplicationOutcome out;
    try {
        switch (estimand.kind) {
        case Estimand::Kind::ExpectedPotentialOutcome: {
            const auto r = balance_arm(method, ds, estimand, estimand.level, ctx);
            out.estimate = r.estimate;
            out.h_divergence = r.h_divergence;
            out.ess = r.ess;
            break;
        }
        case Estimand::Kind::ATE: {
            const auto treated = balance_arm(method, ds, estimand, 1, ctx);
            const auto control = balance_arm(method, ds, estimand, 0, ctx);
            out.estimate = treated.estimate - control.estimate;
            out.h_divergence = 0.5 * (treated.h_divergence + control.h_divergence);
            out.ess = 0.5 * (treated.ess + control.ess);
            break;
        }
        case Estimand::Kind::ATT: {
            const auto levels = ds.present_levels();
            if (levels.size() != 2) throw InvalidInput("ATT requires exactly two treatment values present");
            const int other = levels[0] == estimand.level ? levels[1] : levels[0];
            const auto control = balance_arm(method, ds, estimand, other, ctx);
            const Vector y_ref = outcomes_for_rows(ds, rows_with_treatment(ds, estimand.level));
            out.estimate = y_ref.mean() - control.estimate;
            out.h_divergence = control.h_divergence;
            out.ess = control.ess;
            break;
        }
        }
    } catch (const std::exception& e) {
        out.estimate.reset();
        out.error = e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment driver

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ADVBAL_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline void aggregate(MethodSizeResult& row, const std::optional<double>& truth, const ExperimentConfig& cfg,
                      std::uint64_t seed) {
    std::vector<double> errors;
    double est_sum = 0.0;
    double h_sum = 0.0;
    double ess_sum = 0.0;
    for (const auto& rep : row.replications) {
        if (!rep.estimate) {
            ++row.n_failures;
            continue;
        }
        est_sum += *rep.estimate;
        h_sum += rep.h_divergence;
        ess_sum += rep.ess;
        errors.push_back(*rep.estimate - truth.value_or(0.0));
    }
    row.failed = 2 * row.n_failures > static_cast<int>(row.replications.size());
    if (errors.empty()) return;
    const double k = static_cast<double>(errors.size());
    row.mean_estimate = est_sum / k;
    row.mean_h_divergence = h_sum / k;
    row.mean_ess = ess_sum / k;
    if (!truth) return;
    double sum = 0.0;
    double sq = 0.0;
    for (double e : errors) {
        sum += e;
        sq += e * e;
    }
    row.bias = sum / k;
    row.rmse = std::sqrt(sq / k);
    if (errors.size() == 1) {
        row.ci_lo = row.ci_hi = errors.front();
    } else {
        const auto [lo, hi] = bootstrap_ci(errors, cfg.bootstrap_samples, cfg.ci_level, seed);
        row.ci_lo = lo;
        row.ci_hi = hi;
    }
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<MethodSpec> methods;
    for (const auto& m : cfg.methods) methods.push_back(parse_method(m));

    std::optional<Dataset> csv_data;
    Estimand estimand = cfg.estimand;
    std::optional<double> truth = cfg.truth;
    std::vector<std::size_t> sizes = cfg.sizes;
    if (cfg.benchmark == "csv") {
        csv_data = load_dataset_csv(cfg.csv_path, cfg.schema);
        sizes = {csv_data->rows()};
    } else {
        const auto t = true_values(cfg.benchmark);
        estimand = t.estimand;
        truth = t.true_value;
    }
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

    ReplicationContext base;
    base.cfg = &cfg;
    base.diagnostic = std::get<FamilySpec>(parse_family(cfg.diagnostic_family));

    const std::size_t reps = static_cast<std::size_t>(cfg.replications);
    const std::size_t n_tasks = sizes.size() * reps;
    // outcomes[task][method]
    std::vector<std::vector<ReplicationOutcome>> outcomes(n_tasks);
    std::atomic<std::size_t> next{0};
    std::mutex fatal_mutex;
    std::exception_ptr fatal;

    auto worker = [&] {
        for (std::size_t task = next++; task < n_tasks; task = next++) {
            try {
                const std::size_t si = task / reps;
                const std::size_t r = task % reps;
                const std::uint64_t data_seed = cfg.seed + r;
                Dataset ds;
                if (csv_data) {
                    ds = *csv_data;
                } else if (cfg.benchmark == "kang_schafer") {
                    ds = gen_kang_schafer(sizes[si], data_seed, cfg.transformed).data;
                } else {
                    ds = gen_circular(sizes[si], data_seed).data;
                }
                auto& slot = outcomes[task];
                slot.resize(methods.size());
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    ReplicationContext ctx = base;
                    ctx.seed = mix_seed(data_seed, m);
                    slot[m] = run_method(methods[m], ds, estimand, ctx);
                }
            } catch (...) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };

    const int workers = std::min<int>(resolve_workers(cfg.workers), static_cast<int>(std::max<std::size_t>(1, n_tasks)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    ExperimentResult res;
    res.truth = truth;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            MethodSizeResult row;
            row.method = methods[m].label;
            row.n = sizes[si];
            for (std::size_t r = 0; r < reps; ++r) row.replications.push_back(outcomes[si * reps + r][m]);
            aggregate(row, truth, cfg, mix_seed(cfg.seed, 0xB007 + m * 1000003ULL + sizes[si]));
            res.rows.push_back(std::move(row));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Emission

inline constexpr const char* kResultColumns =
    "method,n,bias,rmse,ci_lo,ci_hi,mean_h_divergence,mean_ess,n_failures";

inline void write_results_csv(std::ostream& out, const ExperimentResult& res) {
    auto opt = [](const std::optional<double>& v) { return v ? detail::format_real(*v) : std::string(); };
    out << kResultColumns << '\n';
    for (const auto& row : res.rows) {
        out << row.method << ',' << row.n << ',' << opt(row.bias) << ',' << opt(row.rmse) << ',' << opt(row.ci_lo)
            << ',' << opt(row.ci_hi) << ',' << detail::format_real(row.mean_h_divergence) << ','
            << detail::format_real(row.mean_ess) << ',' << row.n_failures << '\n';
    }
}

inline nlohmann::json results_to_json(const ExperimentResult& res) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : res.rows) {
        nlohmann::json estimates = nlohmann::json::array();
        nlohmann::json errors = nlohmann::json::array();
        for (const auto& rep : row.replications) {
            estimates.push_back(opt(rep.estimate));
            if (!rep.error.empty()) errors.push_back(rep.error);
        }
        rows.push_back({{"method", row.method},
                        {"n", row.n},
                        {"bias", opt(row.bias)},
                        {"rmse", opt(row.rmse)},
                        {"ci_lo", opt(row.ci_lo)},
                        {"ci_hi", opt(row.ci_hi)},
                        {"mean_h_divergence", row.mean_h_divergence},
                        {"mean_ess", row.mean_ess},
                        {"n_failures", row.n_failures},
                        {"failed", row.failed},
                        {"estimates", estimates},
                        {"errors", errors}});
    }
    return {{"truth", opt(res.truth)}, {"results", rows}};
}

inline ExperimentResult results_from_json(const nlohmann::json& j) {
    auto opt = [](const nlohmann::json& v) -> std::optional<double> {
        if (v.is_null()) return std::nullopt;
        return v.get<double>();
    };
    ExperimentResult res;
    res.truth = opt(j.at("truth"));
    for (const auto& r : j.at("results")) {
        MethodSizeResult row;
        row.method = r.at("method").get<std::string>();
        row.n = r.at("n").get<std::size_t>();
        row.bias = opt(r.at("bias"));
        row.rmse = opt(r.at("rmse"));
        row.ci_lo = opt(r.at("ci_lo"));
        row.ci_hi = opt(r.at("ci_hi"));
        row.mean_h_divergence = r.at("mean_h_divergence").get<double>();
        row.mean_ess = r.at("mean_ess").get<double>();
        row.n_failures = r.at("n_failures").get<int>();
        row.failed = r.value("failed", false);
        const auto& errors = r.value("errors", nlohmann::json::array());
        std::size_t next_error = 0;
        for (const auto& e : r.value("estimates", nlohmann::json::array())) {
            ReplicationOutcome rep;
            rep.estimate = opt(e);
            if (!rep.estimate && next_error < errors.size()) rep.error = errors[next_error++].get<std::string>();
            row.replications.push_back(std::move(rep));
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

inline void emit_results(const ExperimentResult& res, const std::string& format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    if (format == "json") {
        out << results_to_json(res).dump(2) << '\n';
    } else if (format == "csv") {
        write_results_csv(out, res);
    } else {
        throw InvalidInput("unknown output format '" + format + "'");
    }
    out.flush();
    if (!out) throw Error("write to '" + path + "' failed");
}

} // namespace advbal
