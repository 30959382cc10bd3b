#pragma once

#include "qmle/fisher.hpp"
#include "qmle/simulate.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp" // vendored nlohmann::json

namespace qmle {

/// Raised for malformed configs or data files; the CLI maps it to exit 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    std::vector<double> scales;
    std::optional<std::vector<double>> shapes;
    std::optional<double> theta0;
    std::optional<double> spearman_rho;
};

struct OutputConfig {
    std::string dir = "results";
    bool write_csv = true;
    bool write_json = true;
};

struct ScalarCrlbConfig {
    std::vector<double> informations;
    std::optional<std::vector<double>> weights; // defaults to equal
};

/// Parsed experiment configuration. Unknown keys anywhere are rejected.
struct ExperimentConfig {
    ModelConfig model;
    std::vector<std::vector<double>> bank_thresholds;
    std::vector<std::uint64_t> n_grid;
    std::size_t mc_runs = 1;
    std::vector<std::string> estimators;
    std::uint64_t base_seed = 0;
    OptimizerOptions optimizer;
    OutputConfig output;
    std::optional<ScalarCrlbConfig> scalar_crlb;

    nlohmann::json echo; // the normalized config as parsed

    std::vector<QuantizerBank> banks() const;
    /// Truth model; resolves a spearman_rho target into theta0 when needed.
    JointModel truth_model() const;
    double resolved_theta0() const;
    ExperimentPlan plan() const;
};

ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig parse_config_file(const std::string& path);

/// Flat CSV with columns estimator,N,component,mse,mc_se,excluded,theory_mse.
std::string report_to_csv(const MseReport& report);
nlohmann::json report_to_json(const MseReport& report);

/// Self-contained experiment output: echoed config, report, predictions.
struct ResultBundle {
    int schema_version = 1;
    std::string tool_version;
    nlohmann::json config_echo;
    double resolved_theta0 = 0.0;
    nlohmann::json crlb;   // per-estimator covariance/condition info
    MseReport report;

    nlohmann::json to_json() const;
};

/// CSV data files for the fit command. A header of "bank,word,count" gives
/// per-bank quantized counts; a header of "y1,...,yL" gives raw points.
struct FitData {
    std::optional<QuantizedDataset> quantized; // banks attached from config
    std::optional<RawSamples> raw;
};

FitData parse_fit_data_file(const std::string& path, const std::vector<QuantizerBank>& banks);

} // namespace qmle
