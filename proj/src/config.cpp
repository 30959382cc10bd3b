#include "qmle/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace qmle {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

std::vector<double> to_double_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError("config: " + where + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError("config: " + where + " must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string component_name(std::size_t comp) { return "theta" + std::to_string(comp); }

} // namespace

// ---------------------------------------------------------------------------
// parsing

ExperimentConfig parse_config_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown_keys(j, {"model", "banks", "plan", "output", "crlb"}, "top level");

    ExperimentConfig cfg;
    cfg.echo = j;

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown_keys(m, {"marginal_scales", "marginal_shapes", "copula_theta0",
                                "spearman_rho"},
                            "model");
        if (!m.contains("marginal_scales")) {
            throw ConfigError("config: model.marginal_scales is required");
        }
        cfg.model.scales = to_double_vector(m.at("marginal_scales"), "model.marginal_scales");
        for (double s : cfg.model.scales) {
            if (!(s > 0.0)) throw ConfigError("config: marginal scales must be > 0");
        }
        if (m.contains("marginal_shapes")) {
            cfg.model.shapes = to_double_vector(m.at("marginal_shapes"), "model.marginal_shapes");
            if (cfg.model.shapes->size() != cfg.model.scales.size()) {
                throw ConfigError("config: marginal_shapes/scales length mismatch");
            }
        }
        if (m.contains("copula_theta0")) cfg.model.theta0 = m.at("copula_theta0").get<double>();
        if (m.contains("spearman_rho")) cfg.model.spearman_rho = m.at("spearman_rho").get<double>();
        if (cfg.model.theta0 && cfg.model.spearman_rho) {
            throw ConfigError("config: give copula_theta0 or spearman_rho, not both");
        }
    }

    if (j.contains("banks")) {
        const json& banks = j.at("banks");
        if (!banks.is_array() || banks.empty()) {
            throw ConfigError("config: banks must be a non-empty array");
        }
        for (std::size_t i = 0; i < banks.size(); ++i) {
            cfg.bank_thresholds.push_back(
                to_double_vector(banks[i], "banks[" + std::to_string(i) + "]"));
        }
    }

    if (j.contains("plan")) {
        const json& p = j.at("plan");
        reject_unknown_keys(p, {"n_grid", "mc_runs", "estimators", "base_seed", "optimizer"},
                            "plan");
        if (p.contains("n_grid")) {
            for (const auto& v : p.at("n_grid")) {
                if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
                    throw ConfigError("config: plan.n_grid must hold positive integers");
                }
                cfg.n_grid.push_back(v.get<std::uint64_t>());
            }
        }
        if (p.contains("mc_runs")) {
            cfg.mc_runs = p.at("mc_runs").get<std::size_t>();
            if (cfg.mc_runs < 1) throw ConfigError("config: plan.mc_runs must be >= 1");
        }
        if (p.contains("estimators")) {
            for (const auto& v : p.at("estimators")) {
                cfg.estimators.push_back(v.get<std::string>());
            }
        }
        if (p.contains("base_seed")) cfg.base_seed = p.at("base_seed").get<std::uint64_t>();
        if (p.contains("optimizer")) {
            const json& o = p.at("optimizer");
            reject_unknown_keys(o, {"diameter_tol", "max_iterations", "restarts", "initial_step"},
                                "plan.optimizer");
            if (o.contains("diameter_tol")) {
                cfg.optimizer.diameter_tol = o.at("diameter_tol").get<double>();
            }
            if (o.contains("max_iterations")) {
                cfg.optimizer.max_iterations = o.at("max_iterations").get<int>();
            }
            if (o.contains("restarts")) cfg.optimizer.restarts = o.at("restarts").get<int>();
            if (o.contains("initial_step")) {
                cfg.optimizer.initial_step = o.at("initial_step").get<double>();
            }
        }
    }

    if (j.contains("output")) {
        const json& o = j.at("output");
        reject_unknown_keys(o, {"dir", "formats"}, "output");
        if (o.contains("dir")) cfg.output.dir = o.at("dir").get<std::string>();
        if (o.contains("formats")) {
            cfg.output.write_csv = false;
            cfg.output.write_json = false;
            for (const auto& f : o.at("formats")) {
                const std::string fmt = f.get<std::string>();
                if (fmt == "csv") cfg.output.write_csv = true;
                else if (fmt == "json") cfg.output.write_json = true;
                else throw ConfigError("config: unknown output format '" + fmt + "'");
            }
        }
    }

    if (j.contains("crlb")) {
        const json& c = j.at("crlb");
        reject_unknown_keys(c, {"scalar_informations", "weights"}, "crlb");
        ScalarCrlbConfig sc;
        if (!c.contains("scalar_informations")) {
            throw ConfigError("config: crlb.scalar_informations is required in crlb block");
        }
        sc.informations = to_double_vector(c.at("scalar_informations"), "crlb.scalar_informations");
        if (c.contains("weights")) {
            sc.weights = to_double_vector(c.at("weights"), "crlb.weights");
            if (sc.weights->size() != sc.informations.size()) {
                throw ConfigError("config: crlb.weights length mismatch");
            }
        }
        cfg.scalar_crlb = sc;
    }

    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config_json(j);
}

std::vector<QuantizerBank> ExperimentConfig::banks() const {
    if (bank_thresholds.empty()) throw ConfigError("config: banks block is required");
    std::vector<QuantizerBank> out;
    out.reserve(bank_thresholds.size());
    for (const auto& t : bank_thresholds) out.emplace_back(t);
    const std::size_t L = out.front().sensor_count();
    for (const auto& b : out) {
        if (b.sensor_count() != L) throw ConfigError("config: banks disagree on sensor count");
    }
    if (!model.scales.empty() && L != model.scales.size()) {
        throw ConfigError("config: bank thresholds/model dimension mismatch");
    }
    return out;
}

double ExperimentConfig::resolved_theta0() const {
    if (model.theta0) return *model.theta0;
    if (model.spearman_rho) return ClaytonCopula::from_spearman(*model.spearman_rho).theta0;
    throw ConfigError("config: model needs copula_theta0 or spearman_rho");
}

JointModel ExperimentConfig::truth_model() const {
    if (model.scales.empty()) throw ConfigError("config: model block is required");
    if (!model.shapes) throw ConfigError("config: model.marginal_shapes is required here");
    const ParameterVector theta(resolved_theta0(), *model.shapes);
    return JointModel::from_parameters(theta, model.scales);
}

ExperimentPlan ExperimentConfig::plan() const {
    ExperimentPlan p;
    p.banks = banks();
    p.n_grid = n_grid;
    p.mc_runs = mc_runs;
    p.base_seed = base_seed;
    p.optimizer = optimizer;
    for (const auto& e : estimators) {
        try {
            p.estimators.push_back(EstimatorSpec::parse(e));
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(std::string("config: ") + ex.what());
        }
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    return p;
}

// ---------------------------------------------------------------------------
// report serialization

std::string report_to_csv(const MseReport& report) {
    std::ostringstream os;
    os << "estimator,N,component,mse,mc_se,excluded,theory_mse\n";
    for (const auto& c : report.cells) {
        os << c.estimator << ',' << c.n_total << ',' << component_name(c.component) << ','
           << format_double(c.mse) << ',' << format_double(c.mc_se) << ',' << c.excluded << ','
           << format_double(c.theory_mse) << '\n';
    }
    return os.str();
}

json report_to_json(const MseReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        cells.push_back({{"estimator", c.estimator},
                         {"N", c.n_total},
                         {"component", component_name(c.component)},
                         {"mse", c.mse},
                         {"mc_se", c.mc_se},
                         {"excluded", c.excluded},
                         {"theory_mse", c.theory_mse},
                         {"mean_estimate", c.mean_estimate}});
    }
    return json{{"mc_runs", report.mc_runs},
                {"component_count", report.component_count},
                {"cells", std::move(cells)}};
}

json ResultBundle::to_json() const {
    return json{{"schema_version", schema_version},
                {"tool_version", tool_version},
                {"config", config_echo},
                {"resolved_theta0", resolved_theta0},
                {"crlb", crlb},
                {"report", report_to_json(report)}};
}

// ---------------------------------------------------------------------------
// fit data files

FitData parse_fit_data_file(const std::string& path, const std::vector<QuantizerBank>& banks) {
    std::ifstream in(path);
    if (!in) throw ConfigError("data: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw ConfigError("data: empty file '" + path + "'");
    while (!header.empty() && (header.back() == '\r' || header.back() == '\n')) header.pop_back();

    auto split_csv = [](const std::string& line) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        return fields;
    };

    FitData out;
    const std::vector<std::string> head = split_csv(header);

    if (head.size() == 3 && head[0] == "bank" && head[1] == "word" && head[2] == "count") {
        if (banks.empty()) throw ConfigError("data: counts file needs banks in the config");
        const std::size_t L = banks.front().sensor_count();
        QuantizedDataset data;
        for (const auto& b : banks) {
            data.banks.push_back({b, CellCounts{std::vector<std::uint64_t>(b.cell_count(), 0), 0}});
        }
        std::string line;
        std::size_t line_no = 1;
        bool any = false;
        while (std::getline(in, line)) {
            ++line_no;
            while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
            if (line.empty()) continue;
            const auto fields = split_csv(line);
            if (fields.size() != 3) {
                throw ConfigError("data: line " + std::to_string(line_no) + ": expected 3 fields");
            }
            std::size_t bank_idx = 0;
            std::uint64_t count = 0;
            try {
                const long b = std::stol(fields[0]);
                if (b < 1 || static_cast<std::size_t>(b) > banks.size()) {
                    throw std::out_of_range("bank");
                }
                bank_idx = static_cast<std::size_t>(b - 1);
                count = std::stoull(fields[2]);
            } catch (const std::exception&) {
                throw ConfigError("data: line " + std::to_string(line_no) + ": bad bank or count");
            }
            const std::string& word = fields[1];
            if (word.size() != L || word.find_first_not_of("01") != std::string::npos) {
                throw ConfigError("data: line " + std::to_string(line_no) + ": bad cell word '" +
                                  word + "'");
            }
            std::size_t cell = 0;
            for (char ch : word) cell = (cell << 1) | (ch == '1' ? 1u : 0u);
            data.banks[bank_idx].counts.counts[cell] += count;
            data.banks[bank_idx].counts.total += count;
            any = true;
        }
        if (!any || data.total() == 0) throw ConfigError("data: no counts in '" + path + "'");
        out.quantized = std::move(data);
        return out;
    }

    // Raw points: header y1,...,yL.
    for (std::size_t i = 0; i < head.size(); ++i) {
        if (head[i] != "y" + std::to_string(i + 1)) {
            throw ConfigError("data: unrecognized header '" + header + "'");
        }
    }
    RawSamples samples;
    samples.dim = head.size();
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != samples.dim) {
            throw ConfigError("data: line " + std::to_string(line_no) + ": expected " +
                              std::to_string(samples.dim) + " fields");
        }
        for (const auto& f : fields) {
            try {
                samples.values.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw ConfigError("data: line " + std::to_string(line_no) + ": bad number '" + f +
                                  "'");
            }
        }
    }
    if (samples.size() == 0) throw ConfigError("data: no points in '" + path + "'");
    out.raw = std::move(samples);
    return out;
}

} // namespace qmle
