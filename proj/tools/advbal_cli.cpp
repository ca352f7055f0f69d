// advbal: balancing weights, diagnostics and benchmark experiments.
//
//   advbal generate --benchmark circular --n 1000 --seed 7 --output data.csv
//   advbal balance  --data data.csv --estimand epo:1 --method adversarial:lr
//   advbal diagnose --data data.csv --weights weights.csv --estimand epo:1
//   advbal run      --config experiment.json
//
// Exit status: 0 success, 1 configuration error, 2 runtime failure.

#include <advbal/advbal.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

// Thrown for problems with user-supplied settings; everything else is a runtime failure.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string oracle_path_for(const std::string& path) {
    const std::string ext = ".csv";
    if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
        return path.substr(0, path.size() - ext.size()) + ".oracle.csv";
    }
    return path + ".oracle.csv";
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw advbal::Error("cannot open '" + path + "' for writing");
    return out;
}

struct DataOptions {
    std::string path;
    advbal::CsvSchema schema;
    std::string estimand = "ate";
    int treatment_value = 1;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
    cmd->add_option("--data", opts.path, "Dataset CSV")->required();
    cmd->add_option("--treatment_column", opts.schema.treatment_column, "Treatment column name");
    cmd->add_option("--outcome_column", opts.schema.outcome_column, "Outcome column name");
    cmd->add_option("--covariate_columns", opts.schema.covariate_columns,
                    "Covariate columns (default: all other columns)");
    cmd->add_option("--estimand", opts.estimand, "ate, epo:<a> or att:<reference>");
    cmd->add_option("--treatment_value", opts.treatment_value, "Arm whose units are reweighted");
}

advbal::Estimand parse_estimand_or_config_error(const std::string& text) {
    try {
        return advbal::parse_estimand(text);
    } catch (const advbal::InvalidInput& e) {
        throw ConfigError(e.what());
    }
}

std::optional<advbal::BoundParams> bound_params(double max_outcome, double delta) {
    if (max_outcome <= 0.0) return std::nullopt;
    return advbal::BoundParams{max_outcome, delta};
}

advbal::FamilySpec single_family(const std::string& name) {
    advbal::FamilyChoice choice;
    try {
        choice = advbal::parse_family(name);
    } catch (const advbal::InvalidInput& e) {
        throw ConfigError(e.what());
    }
    if (!std::holds_alternative<advbal::FamilySpec>(choice)) {
        throw ConfigError("family '" + name + "' is a selection set, not a single family");
    }
    return std::get<advbal::FamilySpec>(choice);
}

void write_weights(const std::string& path, const std::vector<std::size_t>& rows, const advbal::WeightVector& w) {
    auto out = open_output(path);
    out << "row,weight\n";
    for (std::size_t i = 0; i < rows.size(); ++i) out << rows[i] << ',' << advbal::detail::format_real(w[i]) << '\n';
}

advbal::WeightVector read_weights(const std::string& path, const std::vector<std::size_t>& rows) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open weights file '" + path + "'");
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<std::size_t, double>> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw advbal::ParseError(path + ": expected 'row,weight'");
        try {
            entries.emplace_back(std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw advbal::ParseError(path + ": cannot parse line '" + line + "'");
        }
    }
    if (entries.size() != rows.size()) {
        throw advbal::InvalidInput(path + ": " + std::to_string(entries.size()) + " weights for " +
                                   std::to_string(rows.size()) + " source rows");
    }
    advbal::Vector w(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (entries[i].first != rows[i]) {
            throw advbal::InvalidInput(path + ": row " + std::to_string(entries[i].first) +
                                       " is not the expected source row " + std::to_string(rows[i]));
        }
        w[static_cast<Eigen::Index>(i)] = entries[i].second;
    }
    return advbal::WeightVector::normalized(w);
}

void write_report(const std::string& path, const advbal::BalanceReport& report) {
    const auto text = advbal::to_json(report).dump(2);
    if (path.empty() || path == "-") {
        std::cout << text << '\n';
    } else {
        open_output(path) << text << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial balancing weights for causal-effect estimation"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Emit a benchmark dataset CSV and its .oracle.csv sibling");
    std::string gen_benchmark = "circular";
    std::size_t gen_n = 1000;
    std::uint64_t gen_seed = 0;
    bool gen_transformed = false;
    std::string gen_output;
    gen->add_option("--benchmark", gen_benchmark, "kang_schafer or circular")
        ->check(CLI::IsMember({"kang_schafer", "circular"}));
    gen->add_option("--n", gen_n, "Number of rows");
    gen->add_option("--seed", gen_seed, "Seed");
    gen->add_flag("--transformed", gen_transformed, "Kang-Schafer: emit transformed covariates");
    gen->add_option("--output", gen_output, "Output CSV path")->required();

    // balance
    auto* bal = app.add_subcommand("balance", "Compute weights for one dataset and report balance");
    DataOptions bal_data;
    std::string bal_method = "adversarial:lr";
    int bal_n_iter = 20;
    std::uint64_t bal_seed = 0;
    std::string bal_weights_out = "weights.csv";
    std::string bal_report_out;
    std::string bal_diag_family = "lr";
    double bal_max_outcome = 0.0;
    double bal_delta = 0.05;
    add_data_options(bal, bal_data);
    bal->add_option("--method", bal_method, "unweighted, mmd_v1, ipw:<family> or adversarial:<family>");
    bal->add_option("--n_iter", bal_n_iter, "Adversarial iterations");
    bal->add_option("--seed", bal_seed, "Seed");
    bal->add_option("--weights_out", bal_weights_out, "Weights CSV (row,weight)");
    bal->add_option("--report_out", bal_report_out, "Balance report JSON (default: stdout)");
    bal->add_option("--diagnostic_family", bal_diag_family, "Family for the H-divergence");
    bal->add_option("--max_outcome", bal_max_outcome, "M_Y for the error bound (omit to skip the bound)");
    bal->add_option("--delta", bal_delta, "Confidence parameter for the error bound");

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "Balance report for an existing weights file");
    DataOptions diag_data;
    std::string diag_weights;
    std::string diag_family = "lr";
    std::string diag_report_out;
    std::uint64_t diag_seed = 0;
    double diag_max_outcome = 0.0;
    double diag_delta = 0.05;
    add_data_options(diag, diag_data);
    diag->add_option("--weights", diag_weights, "Weights CSV (row,weight)")->required();
    diag->add_option("--family", diag_family, "Family for the H-divergence");
    diag->add_option("--report_out", diag_report_out, "Balance report JSON (default: stdout)");
    diag->add_option("--seed", diag_seed, "Seed");
    diag->add_option("--max_outcome", diag_max_outcome, "M_Y for the error bound (omit to skip the bound)");
    diag->add_option("--delta", diag_delta, "Confidence parameter for the error bound");

    // run
    auto* run = app.add_subcommand("run", "Run a replicated experiment from a JSON config");
    std::string run_config;
    std::optional<std::uint64_t> o_seed;
    std::optional<int> o_replications;
    std::optional<int> o_bootstrap;
    std::optional<int> o_workers;
    std::optional<int> o_n_iter;
    std::vector<std::size_t> o_sizes;
    std::vector<std::string> o_methods;
    std::optional<std::string> o_output;
    std::optional<std::string> o_format;
    run->add_option("--config", run_config, "Experiment config JSON")->required();
    run->add_option("--seed", o_seed);
    run->add_option("--replications", o_replications);
    run->add_option("--bootstrap_samples", o_bootstrap);
    run->add_option("--workers", o_workers);
    run->add_option("--n_iter", o_n_iter);
    run->add_option("--sizes", o_sizes);
    run->add_option("--methods", o_methods);
    run->add_option("--output", o_output);
    run->add_option("--format", o_format);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*gen) {
            advbal::SimulatedDataset sim = gen_benchmark == "circular"
                                               ? advbal::gen_circular(gen_n, gen_seed)
                                               : advbal::gen_kang_schafer(gen_n, gen_seed, gen_transformed);
            auto out = open_output(gen_output);
            advbal::write_dataset_csv(out, sim.data);
            auto oracle = open_output(oracle_path_for(gen_output));
            advbal::write_oracle_csv(oracle, sim);
            return 0;
        }

        if (*bal || *diag) {
            const DataOptions& opts = *bal ? bal_data : diag_data;
            const auto estimand = parse_estimand_or_config_error(opts.estimand);
            advbal::MethodSpec method;
            std::optional<advbal::FamilySpec> diag_spec;
            if (*bal) {
                try {
                    method = advbal::parse_method(bal_method);
                } catch (const advbal::InvalidInput& e) {
                    throw ConfigError(e.what());
                }
                diag_spec = single_family(bal_diag_family);
            }
            advbal::Dataset ds;
            try {
                ds = advbal::load_dataset_csv(opts.path, opts.schema);
            } catch (const advbal::ParseError& e) {
                throw ConfigError(e.what());
            }
            const auto prob = advbal::build_balancing_problem(ds, estimand, opts.treatment_value);

            if (*bal) {
                advbal::ExperimentConfig cfg;
                cfg.n_iter = bal_n_iter;
                advbal::ReplicationContext ctx;
                ctx.cfg = &cfg;
                ctx.diagnostic = *diag_spec;
                ctx.seed = bal_seed;
                const auto w = advbal::method_weights(method, ds, prob, estimand, opts.treatment_value, ctx);
                write_weights(bal_weights_out, prob.source_rows(), w);
                write_report(bal_report_out,
                             advbal::balance_report(prob, w, *diag_spec, advbal::PredictionMode::train(),
                                                    bound_params(bal_max_outcome, bal_delta), bal_seed));
            } else {
                const auto family = single_family(diag_family);
                const auto w = read_weights(diag_weights, prob.source_rows());
                write_report(diag_report_out,
                             advbal::balance_report(prob, w, family, advbal::PredictionMode::train(),
                                                    bound_params(diag_max_outcome, diag_delta), diag_seed));
            }
            return 0;
        }

        if (*run) {
            advbal::ExperimentConfig cfg;
            try {
                std::ifstream in(run_config);
                if (!in) throw ConfigError("cannot open config '" + run_config + "'");
                cfg = advbal::config_from_json(nlohmann::json::parse(in));
                if (o_seed) cfg.seed = *o_seed;
                if (o_replications) cfg.replications = *o_replications;
                if (o_bootstrap) cfg.bootstrap_samples = *o_bootstrap;
                if (o_workers) cfg.workers = *o_workers;
                if (o_n_iter) cfg.n_iter = *o_n_iter;
                if (!o_sizes.empty()) cfg.sizes = o_sizes;
                if (!o_methods.empty()) cfg.methods = o_methods;
                if (o_output) cfg.output = *o_output;
                if (o_format) cfg.format = *o_format;
                if (cfg.output.empty()) throw ConfigError("config: output path is required");
                cfg.validate();
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config: ") + e.what());
            } catch (const advbal::InvalidInput& e) {
                throw ConfigError(e.what());
            }
            const auto result = advbal::run_experiment(cfg);
            advbal::emit_results(result, cfg.format, cfg.output);
            for (const auto& row : result.rows) {
                if (row.failed) std::cerr << "warning: method " << row.method << " failed at n=" << row.n << '\n';
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return 0;
}
