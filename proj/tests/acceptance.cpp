// Acceptance checks. One PASS/FAIL line per criterion; `--criterion N` runs one.

#include <advbal/advbal.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "divergence_oracles.hpp"
#include "qp_oracles.hpp"
#include "test_data.hpp"

using namespace advbal;

namespace {

// Tolerances and budgets.
constexpr double kMeanOneTol = 1e-9;
constexpr double kIdentityTol = 1e-9;
constexpr double kGradientTol = 1e-4;
constexpr double kQpGridTol = 1e-2;
constexpr double kKktTol = 1e-6;
constexpr double kKangSchaferBiasTol = 1.0;
constexpr double kConfoundedBiasFloor = 5.0;
constexpr double kCoverageFloor = 0.95;
constexpr double kSelectionFloor = 0.90;

// One-off n = 10^6 Monte Carlo run of the treated mean minus 210.
constexpr double kKangSchaferTreatedMeanBias = -9.96;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Matrix gaussian(Eigen::Index n, Eigen::Index d, double shift, RngStream& rng) {
    Matrix x(n, d);
    for (auto& v : x.reshaped()) v = rng.normal() + shift;
    return x;
}

const MethodSizeResult& row(const ExperimentResult& res, const std::string& method, std::size_t n) {
    for (const auto& r : res.rows) {
        if (r.method == method && r.n == n) return r;
    }
    throw InternalError("missing result row " + method);
}

double abs_bias(const ExperimentResult& res, const std::string& method, std::size_t n) {
    const auto& r = row(res, method, n);
    if (r.failed || !r.bias) return std::numeric_limits<double>::infinity();
    return std::abs(*r.bias);
}

ExperimentConfig benchmark_config(const std::string& name, bool transformed, std::vector<std::size_t> sizes,
                                  std::vector<std::string> methods) {
    ExperimentConfig cfg;
    cfg.benchmark = name;
    cfg.transformed = transformed;
    if (name == "kang_schafer") cfg.estimand = Estimand::expected_potential_outcome(1);
    cfg.sizes = std::move(sizes);
    cfg.methods = std::move(methods);
    cfg.replications = 100;
    cfg.seed = 20240;
    cfg.bootstrap_samples = 200;
    cfg.workers = 1;
    return cfg;
}

Outcome weight_invariants() {
    Outcome out;
    RngStream rng(101);
    int iterations = 0;
    for (int p = 0; p < 50; ++p) {
        const Eigen::Index n = p % 2 ? 500 : 50;
        const auto nt = static_cast<Eigen::Index>(n / 2 + rng.below(static_cast<std::uint64_t>(n)));
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(4));
        const BalancingProblem prob(gaussian(n, d, 0.0, rng), gaussian(nt, d, rng.uniform(0.0, 1.0), rng));
        AdversarialParams params;
        params.seed = static_cast<std::uint64_t>(p);
        if (p % 3 == 1) params.loss = LossKind::Log;
        if (p % 5 == 2) params.prediction_mode = PredictionMode::cross_fit(3);
        const auto res = adversarial_balance(prob, params);
        for (const auto& it : res.trace.iterations) {
            ++iterations;
            const Vector& w = it.weights;
            if (!(w.minCoeff() > 0.0) || std::abs(w.mean() - 1.0) > kMeanOneTol) {
                out.pass = false;
                out.detail = fmt("problem %d broke positivity or mean one", p);
                return out;
            }
        }
    }

    int order_violations = 0;
    int constant_mismatches = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(30));
        Vector raw(n), losses(n);
        for (auto& v : raw) v = rng.uniform(0.1, 5.0);
        for (auto& v : losses) v = 0.25 * static_cast<double>(rng.below(5));
        const auto w = WeightVector::normalized(raw);
        const double alpha = rng.uniform(0.05, 1.5);
        const auto next = exp_gradient_step(w, losses, alpha);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double before = w[static_cast<std::size_t>(i)] / w[static_cast<std::size_t>(j)];
                const double after = next[static_cast<std::size_t>(i)] / next[static_cast<std::size_t>(j)];
                if (losses[i] > losses[j] && !(after > before)) ++order_violations;
                if (losses[i] < losses[j] && !(after < before)) ++order_violations;
            }
        }
        const auto same = exp_gradient_step(w, Vector::Constant(n, rng.uniform(0.0, 3.0)), alpha);
        // The multipliers are exactly 1, so the result is the renormalized input;
        // renormalizing a mean-one vector may still move the last bit.
        const bool bitwise = same.values() == WeightVector::normalized(w.values()).values();
        const double drift = ((same.values() - w.values()).array() / w.values().array()).abs().maxCoeff();
        if (!bitwise || drift > 1e-15) ++constant_mismatches;
    }
    out.pass = order_violations == 0 && constant_mismatches == 0;
    out.detail = fmt("%d iterates checked; %d order violations, %d constant-loss changes", iterations,
                     order_violations, constant_mismatches);
    return out;
}

Outcome divergence_identity() {
    RngStream rng(202);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(29));
        const auto nt = static_cast<Eigen::Index>(2 + rng.below(29));
        const Matrix s = gaussian(n, 1, 0.0, rng);
        const Matrix t = gaussian(nt, 1, rng.uniform(-1.5, 1.5), rng);
        const WeightVector w(fixtures::random_simplex_weights(n, rng));
        const double via_loss = h_divergence(BalancingProblem(s, t), w, FamilySpec::stump());
        worst = std::max(worst, std::abs(via_loss - fixtures::threshold_ipm(s.col(0), t.col(0), w.values())));
    }
    return {worst <= kIdentityTol, fmt("max |2(1 - min L) - direct| = %.3g over 100 instances", worst)};
}

Outcome gradient_checks() {
    RngStream rng(303);
    std::map<std::string, double> worst;
    for (const auto& family : {FamilySpec::logistic(), FamilySpec::kernel_rbf(), FamilySpec::mlp(1),
                               FamilySpec::mlp(2)}) {
        const int count = family.kind == FamilyKind::Mlp ? 10 : 20;
        const std::string key = family.kind == FamilyKind::Mlp ? "mlp" : family.name();
        for (int rep = 0; rep < count; ++rep) {
            const auto n = static_cast<Eigen::Index>(8 + rng.below(25));
            const auto d = static_cast<Eigen::Index>(1 + rng.below(4));
            Matrix x = gaussian(n, d, 0.0, rng);
            std::vector<int> labels(static_cast<std::size_t>(n));
            for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(rng.below(2));
            labels[0] = 0;
            labels[1] = 1;
            Vector w(n);
            for (auto& v : w) v = rng.uniform(0.2, 3.0);
            worst[key] = std::max(worst[key], gradient_check(family, x, labels, w, 1e-6, rng.next_u64()));
        }
    }
    bool pass = true;
    std::string detail;
    for (const auto& [name, err] : worst) {
        pass = pass && err <= kGradientTol;
        detail += fmt("%s %.2g; ", name.c_str(), err);
    }
    return {pass, "max relative error: " + detail.substr(0, detail.size() - 2)};
}

Outcome qp_oracles() {
    RngStream rng(404);
    double grid_worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const auto qp = fixtures::random_psd_qp(3, rng);
        const auto solved = simplex_qp_solve(qp, WeightVector::uniform(3), 1e-12, 100000);
        const Vector grid = fixtures::grid_minimize(3, 600, [&](const Vector& u) { return qp.objective(u); });
        grid_worst = std::max(grid_worst, (solved.weights.values() - grid).cwiseAbs().maxCoeff());
    }
    double kkt_worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto qp = fixtures::random_psd_qp(4, rng);
        const auto solved = simplex_qp_solve(qp, WeightVector::uniform(4), 1e-12, 100000);
        kkt_worst = std::max(kkt_worst, fixtures::kkt_residual(qp, solved.weights.values()));
    }
    return {grid_worst <= kQpGridTol && kkt_worst <= kKktTol,
            fmt("n=3 grid gap %.3g (grid spacing 0.005), n=4 KKT residual %.3g", grid_worst, kkt_worst)};
}

Outcome kang_schafer_plain() {
    const auto res = run_experiment(
        benchmark_config("kang_schafer", false, {2000}, {"unweighted", "ipw:lr", "adversarial:lr"}));
    const auto& naive = row(res, "unweighted", 2000);
    const double ipw = abs_bias(res, "ipw:lr", 2000);
    const double adv = abs_bias(res, "adversarial:lr", 2000);
    const double naive_bias = naive.bias.value_or(0.0);
    const bool sign_ok = std::signbit(naive_bias) == std::signbit(kKangSchaferTreatedMeanBias);
    return {ipw < kKangSchaferBiasTol && adv < kKangSchaferBiasTol && std::abs(naive_bias) > kConfoundedBiasFloor &&
                sign_ok,
            fmt("|bias| ipw:lr %.3f, adversarial:lr %.3f; unweighted bias %.3f (oracle %.2f)", ipw, adv, naive_bias,
                kKangSchaferTreatedMeanBias)};
}

Outcome kang_schafer_transformed() {
    const auto res = run_experiment(benchmark_config("kang_schafer", true, {1000}, {"ipw:lr", "adversarial:lr"}));
    const double ipw = row(res, "ipw:lr", 1000).rmse.value_or(INFINITY);
    const double adv = row(res, "adversarial:lr", 1000).rmse.value_or(INFINITY);
    return {adv < ipw, fmt("RMSE adversarial:lr %.3f vs ipw:lr %.3f", adv, ipw)};
}

Outcome circular() {
    // The size trend is gated on the weighting methods. The unweighted mean has
    // no classifier; it is listed last for reference only.
    const std::vector<std::string> methods = {"ipw:lr", "mmd_v1", "adversarial:kernel", "adversarial:lr"};
    auto all = methods;
    all.push_back("unweighted");
    const auto res = run_experiment(benchmark_config("circular", false, {500, 1000, 5000}, all));
    const double mmd = abs_bias(res, "mmd_v1", 1000);
    const double kern = abs_bias(res, "adversarial:kernel", 1000);
    const double lr = abs_bias(res, "adversarial:lr", 1000);
    bool pass = mmd < lr && kern < lr;
    std::string detail = fmt("n=1000 |bias| mmd_v1 %.4f, adversarial:kernel %.4f, adversarial:lr %.4f; 500->5000:", mmd,
                             kern, lr);
    for (const auto& m : methods) {
        const double small = abs_bias(res, m, 500);
        const double large = abs_bias(res, m, 5000);
        pass = pass && large < small;
        detail += fmt(" %s %.4f->%.4f (rmse %.4f->%.4f)", m.c_str(), small, large,
                      row(res, m, 500).rmse.value_or(NAN), row(res, m, 5000).rmse.value_or(NAN));
    }
    detail += fmt("; unweighted (reference) %.4f->%.4f", abs_bias(res, "unweighted", 500),
                  abs_bias(res, "unweighted", 5000));
    return {pass, detail};
}

Outcome bound_coverage() {
    const fixtures::ThresholdCombination f{{-0.5, 0.3, 1.0}, {0.4, -0.3, 0.2}};
    constexpr double m = 1.0;
    constexpr int reps = 500;
    int covered = 0;
    double worst_ratio = 0.0;
    for (int r = 0; r < reps; ++r) {
        RngStream rng(static_cast<std::uint64_t>(5000 + r));
        const Matrix s = gaussian(150, 1, 0.0, rng);
        const Matrix t = gaussian(150, 1, 0.5, rng);
        Vector y(150);
        for (Eigen::Index i = 0; i < 150; ++i) y[i] = f(s(i, 0)) + rng.uniform(-0.1, 0.1);
        const BalancingProblem prob(s, t);
        AdversarialParams params;
        params.family = FamilySpec::stump();
        params.seed = static_cast<std::uint64_t>(r);
        const auto w = adversarial_balance(prob, params).weights;
        double target_f = 0.0;
        for (Eigen::Index j = 0; j < 150; ++j) target_f += f(t(j, 0));
        target_f /= 150.0;
        const double error = std::abs(weighted_outcome_estimate(w, y) - target_f);
        const double bound = theorem_bound(h_divergence(prob, w, FamilySpec::stump()), weight_sq_norm(w), m, 0.05);
        covered += error <= bound;
        worst_ratio = std::max(worst_ratio, error / bound);
    }
    const double rate = static_cast<double>(covered) / reps;
    return {rate >= kCoverageFloor, fmt("error below bound in %d/%d replications (max error/bound %.3f)", covered,
                                        reps, worst_ratio)};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ADVBAL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism() {
    const auto dir = std::filesystem::temp_directory_path() / fmt("advbal_acceptance_%d", static_cast<int>(getpid()));
    std::filesystem::create_directories(dir);
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"benchmark": "circular", "sizes": [200, 400], "replications": 6, "seed": 11,
                   "methods": ["unweighted", "ipw:lr", "mmd_v1", "adversarial:lr", "adversarial:kernel"],
                   "bootstrap_samples": 100, "output": ")"
            << (dir / "a.csv").string() << "\"}";
    }
    const std::string base = "run --config " + (dir / "cfg.json").string();
    int failures = 0;
    failures += run_cli(base + " --workers 1") != 0;
    failures += run_cli(base + " --workers 1 --output " + (dir / "b.csv").string()) != 0;
    failures += run_cli(base + " --workers 4 --output " + (dir / "c.csv").string()) != 0;
    failures += run_cli(base + " --workers 4 --format json --output " + (dir / "c.json").string()) != 0;
    failures += run_cli(base + " --workers 1 --format json --output " + (dir / "d.json").string()) != 0;
    const std::string a = slurp(dir / "a.csv");
    const bool same = !a.empty() && a == slurp(dir / "b.csv") && a == slurp(dir / "c.csv") &&
                      slurp(dir / "c.json") == slurp(dir / "d.json");
    std::filesystem::remove_all(dir);
    return {failures == 0 && same,
            fmt("%d failed runs; outputs %s across repeat and 1 vs 4 workers", failures,
                same ? "byte-identical" : "differ")};
}

Outcome cv_selection() {
    const std::vector<FamilySpec> cands = {FamilySpec::logistic(), FamilySpec::kernel_rbf()};
    int kernel_on_circles = 0;
    int lr_on_linear = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto c = fixtures::circles(300, 700 + seed);
        const auto sc = cross_val_select(cands, c.x, c.labels, Vector::Ones(300), 5, seed);
        kernel_on_circles += sc.family.kind == FamilyKind::KernelLogisticRBF;
        const auto l = fixtures::linear_separated(300, 800 + seed, 0.5);
        const auto sl = cross_val_select(cands, l.x, l.labels, Vector::Ones(300), 5, seed);
        lr_on_linear += sl.family.kind == FamilyKind::LogisticRegression;
    }
    return {kernel_on_circles >= kSelectionFloor * 50 && lr_on_linear >= kSelectionFloor * 50,
            fmt("kernel on circles %d/50, lr on linear %d/50", kernel_on_circles, lr_on_linear)};
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"advbal acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "run a single criterion (1-10)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {1, "weight invariants", 60, weight_invariants},
        {2, "divergence identity", 10, divergence_identity},
        {3, "gradient checks", 30, gradient_checks},
        {4, "qp oracles", 60, qp_oracles},
        {5, "kang-schafer bias", 600, kang_schafer_plain},
        {6, "kang-schafer transformed rmse", 600, kang_schafer_transformed},
        {7, "circular", 1800, circular},
        {8, "error bound coverage", 300, bound_coverage},
        {9, "cli determinism", 120, cli_determinism},
        {10, "cv selection", 300, cv_selection},
    };

    int failed = 0;
    bool ran = false;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        ran = true;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s criterion %d (%s): %s [%.1fs of %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    if (!ran) {
        std::fprintf(stderr, "no criterion %d\n", only);
        return 2;
    }
    return failed == 0 ? 0 : 1;
}
