#include "qmle/config.hpp"
#include "qmle/estimate.hpp"
#include "qmle/fisher.hpp"
#include "qmle/simulate.hpp"

#include "CLI11.hpp"
#include "bundled_configs.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitNotConverged = 3;

void print_error(const std::string& msg) { std::cerr << "qmle: error: " << msg << "\n"; }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

// Theory block for the bundle: per estimator, covariance of the quantized
// CRLB at the truth (when defined).
json crlb_section(const qmle::ExperimentPlan& plan, const qmle::JointModel& truth) {
    json out = json::object();
    std::vector<qmle::FisherMatrix> fims;
    try {
        for (const auto& b : plan.banks) {
            fims.push_back(qmle::fim_quantized(truth.parameters(), b, truth));
        }
    } catch (const std::exception&) {
        return out;
    }
    for (const auto& est : plan.estimators) {
        try {
            qmle::CrlbPrediction pred;
            if (est.kind == qmle::EstimatorKind::Robust) {
                pred = qmle::combine_fims(fims, qmle::WeightVector::equal(fims.size()));
            } else if (est.kind == qmle::EstimatorKind::Single) {
                const qmle::FisherMatrix one[1] = {fims[est.bank_index]};
                pred = qmle::combine_fims(one, qmle::WeightVector::equal(1));
            } else {
                continue;
            }
            out[est.label()] = {{"covariance", matrix_to_json(pred.covariance)},
                                {"condition_number", pred.condition_number}};
        } catch (const std::exception&) {
            // leave the estimator out when the combination is singular
        }
    }
    return out;
}

int run_experiment_config(const qmle::ExperimentConfig& cfg, const fs::path& out_dir,
                          unsigned jobs) {
    const qmle::JointModel truth = cfg.truth_model();
    const qmle::ExperimentPlan plan = cfg.plan();

    const auto t0 = std::chrono::steady_clock::now();
    const qmle::MseReport report = qmle::run_experiment(plan, truth, jobs);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    qmle::ResultBundle bundle;
    bundle.tool_version = QMLE_VERSION;
    bundle.config_echo = cfg.echo;
    bundle.resolved_theta0 = cfg.resolved_theta0();
    bundle.crlb = crlb_section(plan, truth);
    bundle.report = report;

    fs::create_directories(out_dir);
    if (cfg.output.write_csv) {
        write_text_file(out_dir / "results.csv", qmle::report_to_csv(report));
    }
    if (cfg.output.write_json) {
        write_text_file(out_dir / "results.json", bundle.to_json().dump(2) + "\n");
    }
    // Timing lives outside the bundle so result files stay byte-identical
    // across worker counts.
    write_text_file(out_dir / "timing.json",
                    json{{"wall_clock_seconds", seconds}}.dump(2) + "\n");
    std::cout << "wrote " << (out_dir / "results.csv").string() << " ("
              << fmt(seconds) << "s)\n";
    return kExitOk;
}

int run_crlb_config(const qmle::ExperimentConfig& cfg) {
    if (cfg.scalar_crlb) {
        const auto& sc = *cfg.scalar_crlb;
        std::vector<qmle::FisherMatrix> fims;
        for (double info : sc.informations) fims.push_back(qmle::FisherMatrix::scalar(info));
        qmle::WeightVector w = sc.weights ? qmle::WeightVector{*sc.weights}
                                          : qmle::WeightVector::equal(fims.size());
        std::cout << "scalar informations:";
        for (double info : sc.informations) std::cout << ' ' << fmt(info);
        std::cout << "\n";
        const auto all = qmle::combine_fims(fims, w);
        std::cout << "combined variance (all banks): " << fmt(all.covariance(0, 0)) << "\n";
        if (fims.size() > 1) {
            for (std::size_t drop = 0; drop < fims.size(); ++drop) {
                std::vector<qmle::FisherMatrix> rest;
                for (std::size_t j = 0; j < fims.size(); ++j) {
                    if (j != drop) rest.push_back(fims[j]);
                }
                const auto pred =
                    qmle::combine_fims(rest, qmle::WeightVector::equal(rest.size()));
                std::cout << "combined variance (without bank " << (drop + 1)
                          << "): " << fmt(pred.covariance(0, 0)) << "\n";
            }
        }
        return kExitOk;
    }

    const qmle::JointModel truth = cfg.truth_model();
    const auto banks = cfg.banks();
    std::vector<qmle::FisherMatrix> fims;
    for (const auto& b : banks) {
        fims.push_back(qmle::fim_quantized(truth.parameters(), b, truth));
    }
    for (std::size_t j = 0; j < fims.size(); ++j) {
        std::cout << "bank " << (j + 1) << " " << banks[j].label() << " fim_diag:";
        for (Eigen::Index i = 0; i < fims[j].matrix.rows(); ++i) {
            std::cout << ' ' << fmt(fims[j].matrix(i, i));
        }
        std::cout << "\n";
    }
    const auto pred = qmle::combine_fims(fims, qmle::WeightVector::equal(fims.size()));
    std::cout << "combined covariance diag:";
    for (Eigen::Index i = 0; i < pred.covariance.rows(); ++i) {
        std::cout << ' ' << fmt(pred.covariance(i, i));
    }
    std::cout << "\ncondition number: " << fmt(pred.condition_number) << "\n";
    return kExitOk;
}

int run_fit(const qmle::ExperimentConfig& cfg, const std::string& data_path,
            std::optional<std::uint64_t> seed_override) {
    if (cfg.model.scales.empty()) throw qmle::ConfigError("config: model block is required");
    const std::vector<qmle::QuantizerBank> banks =
        cfg.bank_thresholds.empty() ? std::vector<qmle::QuantizerBank>{} : cfg.banks();
    const qmle::FitData data = qmle::parse_fit_data_file(data_path, banks);

    const std::size_t L = cfg.model.scales.size();
    const qmle::ParameterVector family(1.0, std::vector<double>(L, 1.0));
    const qmle::JointModel model = qmle::JointModel::from_parameters(family, cfg.model.scales);

    qmle::OptimizerOptions opts = cfg.optimizer;
    if (seed_override) opts.seed = *seed_override;
    else opts.seed = cfg.base_seed;

    qmle::MleResult result;
    if (data.quantized) {
        result = qmle::fit_quantized_mle(*data.quantized, model, opts);
    } else {
        result = qmle::fit_raw_mle(*data.raw, model, opts);
    }

    std::cout << "theta_hat:";
    for (double c : result.theta_hat.components()) std::cout << ' ' << fmt(c);
    std::cout << "\nloglik: " << fmt(result.loglik) << "\n"
              << "converged: " << (result.converged ? "true" : "false") << "\n"
              << "iterations: " << result.iterations << "\n"
              << "restarts: " << result.n_restarts_used << "\n";

    if (data.quantized) {
        try {
            std::vector<qmle::FisherMatrix> fims;
            std::vector<std::uint64_t> totals;
            for (const auto& b : data.quantized->banks) {
                fims.push_back(qmle::fim_quantized(result.theta_hat, b.bank, model));
                totals.push_back(b.counts.total);
            }
            const auto pred =
                qmle::combine_fims(fims, qmle::WeightVector::from_totals(totals));
            std::cout << "crlb_diag_at_theta_hat:";
            const double n = static_cast<double>(data.quantized->total());
            for (Eigen::Index i = 0; i < pred.covariance.rows(); ++i) {
                std::cout << ' ' << fmt(pred.covariance(i, i) / n);
            }
            std::cout << "\ncondition_number: " << fmt(pred.condition_number) << "\n";
        } catch (const std::exception& e) {
            std::cout << "crlb_diag_at_theta_hat: unavailable (" << e.what() << ")\n";
        }
    }
    return result.converged ? kExitOk : kExitNotConverged;
}

int run_reproduce(const fs::path& out_dir, unsigned jobs) {
    for (const auto& bc : qmle::bundled::kAll) {
        const qmle::ExperimentConfig cfg = qmle::parse_config_json(json::parse(bc.text));
        std::cout << "== " << bc.name << "\n";
        if (cfg.scalar_crlb || cfg.n_grid.empty()) {
            run_crlb_config(cfg);
        } else {
            run_experiment_config(cfg, out_dir / bc.name, jobs);
        }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint-parameter maximum likelihood from 1-bit quantized multi-sensor data"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir_flag;
    std::optional<std::uint64_t> seed_override;
    unsigned jobs = 1;
    bool reproduce = false;

    auto* fit = app.add_subcommand("fit", "Fit model parameters to a data file");
    fit->add_option("--config", config_path, "experiment config (JSON)")->required();
    fit->add_option("--data", data_path, "CSV data: quantized counts or raw points")->required();
    fit->add_option("--seed", seed_override, "override the optimizer base seed");

    auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo study");
    experiment->add_option("--config", config_path, "experiment config (JSON)");
    experiment->add_option("--out-dir", out_dir_flag, "output directory override");
    experiment->add_option("--seed", seed_override, "override the plan base seed");
    experiment->add_option("--jobs", jobs, "worker count (does not change results)");
    experiment->add_flag("--reproduce-paper", reproduce,
                         "run the bundled study configs end to end");

    auto* crlb = app.add_subcommand("crlb", "Print Fisher information and combined bounds");
    crlb->add_option("--config", config_path, "config with banks+model or scalar informations")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        print_error(e.what());
        return kExitBadInput;
    }

    try {
        if (fit->parsed()) {
            return run_fit(qmle::parse_config_file(config_path), data_path, seed_override);
        }
        if (experiment->parsed()) {
            if (reproduce) {
                const fs::path dir = out_dir_flag.empty() ? "reproduce" : out_dir_flag;
                return run_reproduce(dir, jobs);
            }
            if (config_path.empty()) {
                print_error("experiment: --config is required (or --reproduce-paper)");
                return kExitBadInput;
            }
            qmle::ExperimentConfig cfg = qmle::parse_config_file(config_path);
            if (seed_override) {
                cfg.base_seed = *seed_override;
                cfg.echo["plan"]["base_seed"] = *seed_override;
            }
            const fs::path dir = out_dir_flag.empty() ? fs::path(cfg.output.dir)
                                                      : fs::path(out_dir_flag);
            return run_experiment_config(cfg, dir, jobs);
        }
        if (crlb->parsed()) {
            return run_crlb_config(qmle::parse_config_file(config_path));
        }
    } catch (const qmle::ConfigError& e) {
        print_error(e.what());
        return kExitBadInput;
    } catch (const std::exception& e) {
        print_error(e.what());
        return kExitError;
    }
    return kExitOk;
}
