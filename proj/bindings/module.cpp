#include "qmle/config.hpp"
#include "qmle/estimate.hpp"
#include "qmle/fisher.hpp"
#include "qmle/prob_models.hpp"
#include "qmle/quantize.hpp"
#include "qmle/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace qmle;

namespace {

RawSamples samples_from_rows(const std::vector<std::vector<double>>& rows) {
    RawSamples s;
    for (const auto& r : rows) s.push_back(r);
    return s;
}

std::vector<std::vector<double>> samples_to_rows(const RawSamples& s) {
    std::vector<std::vector<double>> rows;
    rows.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto p = s.point(i);
        rows.emplace_back(p.begin(), p.end());
    }
    return rows;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Maximum likelihood estimation from dependent 1-bit quantized sensor data";
    m.attr("__version__") = QMLE_VERSION;

    py::class_<GammaMarginal>(m, "GammaMarginal")
        .def(py::init<double, double>(), py::arg("shape"), py::arg("scale"))
        .def_readonly("shape", &GammaMarginal::shape)
        .def_readonly("scale", &GammaMarginal::scale)
        .def("pdf", &GammaMarginal::pdf)
        .def("log_pdf", &GammaMarginal::log_pdf)
        .def("cdf", &GammaMarginal::cdf)
        .def("quantile", &GammaMarginal::quantile)
        .def("mean", &GammaMarginal::mean);

    py::class_<ClaytonCopula>(m, "ClaytonCopula")
        .def(py::init<double>(), py::arg("theta0"))
        .def_readonly("theta0", &ClaytonCopula::theta0)
        .def("cdf", py::overload_cast<double, double>(&ClaytonCopula::cdf, py::const_))
        .def("density", &ClaytonCopula::density)
        .def("spearman_rho", &ClaytonCopula::spearman_rho)
        .def_static("from_spearman", &ClaytonCopula::from_spearman);

    py::class_<ParameterVector>(m, "ParameterVector")
        .def(py::init<double, std::vector<double>>(), py::arg("theta0"),
             py::arg("marginal_shapes"))
        .def_readonly("theta0", &ParameterVector::theta0)
        .def_readonly("marginal_shapes", &ParameterVector::marginal_shapes)
        .def("components", &ParameterVector::components)
        .def("dimension", &ParameterVector::dimension);

    py::class_<JointModel>(m, "JointModel")
        .def_static(
            "from_parameters",
            [](const ParameterVector& theta, const std::vector<double>& scales) {
                return JointModel::from_parameters(theta, scales);
            },
            py::arg("theta"), py::arg("scales"))
        .def("at", &JointModel::at)
        .def("sensor_count", &JointModel::sensor_count)
        .def("parameters", &JointModel::parameters)
        .def("log_pdf",
             [](const JointModel& self, const std::vector<double>& y) { return self.log_pdf(y); })
        .def("cdf",
             [](const JointModel& self, const std::vector<double>& y) { return self.cdf(y); });

    py::class_<QuantizerBank>(m, "QuantizerBank")
        .def(py::init<std::vector<double>, std::string>(), py::arg("thresholds"),
             py::arg("label") = "")
        .def("thresholds", &QuantizerBank::thresholds)
        .def("label", &QuantizerBank::label)
        .def("sensor_count", &QuantizerBank::sensor_count)
        .def("quantize_index", [](const QuantizerBank& self, const std::vector<double>& y) {
            return self.quantize_index(y);
        });

    m.def(
        "cell_pmf",
        [](const ParameterVector& theta, const QuantizerBank& bank, const JointModel& model) {
            return cell_pmf(theta, bank, model).probs;
        },
        py::arg("theta"), py::arg("bank"), py::arg("model"));

    py::class_<CellCounts>(m, "CellCounts")
        .def(py::init([](std::vector<std::uint64_t> counts) {
                 CellCounts c;
                 c.counts = std::move(counts);
                 c.total = 0;
                 for (auto n : c.counts) c.total += n;
                 return c;
             }),
             py::arg("counts"))
        .def_readonly("counts", &CellCounts::counts)
        .def_readonly("total", &CellCounts::total);

    py::class_<QuantizedDataset>(m, "QuantizedDataset")
        .def(py::init([](const std::vector<std::pair<QuantizerBank, CellCounts>>& banks) {
                 QuantizedDataset d;
                 for (const auto& [bank, counts] : banks) d.banks.push_back({bank, counts});
                 return d;
             }),
             py::arg("banks"))
        .def("total", &QuantizedDataset::total);

    py::class_<OptimizerOptions>(m, "OptimizerOptions")
        .def(py::init<>())
        .def_readwrite("diameter_tol", &OptimizerOptions::diameter_tol)
        .def_readwrite("max_iterations", &OptimizerOptions::max_iterations)
        .def_readwrite("restarts", &OptimizerOptions::restarts)
        .def_readwrite("initial_step", &OptimizerOptions::initial_step)
        .def_readwrite("seed", &OptimizerOptions::seed);

    py::class_<MleResult>(m, "MleResult")
        .def_readonly("theta_hat", &MleResult::theta_hat)
        .def_readonly("loglik", &MleResult::loglik)
        .def_readonly("converged", &MleResult::converged)
        .def_readonly("iterations", &MleResult::iterations)
        .def_readonly("n_restarts_used", &MleResult::n_restarts_used);

    m.def("quantized_loglik", &quantized_loglik, py::arg("theta"), py::arg("data"),
          py::arg("model"));
    m.def(
        "raw_loglik",
        [](const ParameterVector& theta, const std::vector<std::vector<double>>& samples,
           const JointModel& model) { return raw_loglik(theta, samples_from_rows(samples), model); },
        py::arg("theta"), py::arg("samples"), py::arg("model"));
    m.def("fit_quantized_mle", &fit_quantized_mle, py::arg("data"), py::arg("model"),
          py::arg("options") = OptimizerOptions{});
    m.def(
        "fit_raw_mle",
        [](const std::vector<std::vector<double>>& samples, const JointModel& model,
           const OptimizerOptions& opts) {
            return fit_raw_mle(samples_from_rows(samples), model, opts);
        },
        py::arg("samples"), py::arg("model"), py::arg("options") = OptimizerOptions{});

    py::class_<FisherMatrix>(m, "FisherMatrix")
        .def_static("scalar", &FisherMatrix::scalar, py::arg("information"), py::arg("id") = "")
        .def_readonly("matrix", &FisherMatrix::matrix)
        .def_readonly("bank_id", &FisherMatrix::bank_id);

    py::class_<WeightVector>(m, "WeightVector")
        .def_static("equal", &WeightVector::equal, py::arg("count"))
        .def_readonly("omegas", &WeightVector::omegas);

    py::class_<CrlbPrediction>(m, "CrlbPrediction")
        .def_readonly("covariance", &CrlbPrediction::covariance)
        .def_readonly("condition_number", &CrlbPrediction::condition_number);

    m.def("fim_quantized", &fim_quantized, py::arg("theta"), py::arg("bank"), py::arg("model"),
          py::arg("step_scale") = 1e-5);
    m.def(
        "combine_fims",
        [](const std::vector<FisherMatrix>& fims, const WeightVector& w) {
            return combine_fims(fims, w);
        },
        py::arg("fims"), py::arg("weights"));
    m.def(
        "predict_asymptotic_mse",
        [](const ParameterVector& theta_star, const std::vector<QuantizerBank>& banks,
           const WeightVector& w, const JointModel& model, std::uint64_t n) {
            return predict_asymptotic_mse(theta_star, banks, w, model, n);
        },
        py::arg("theta_star"), py::arg("banks"), py::arg("weights"), py::arg("model"),
        py::arg("n_samples"));

    m.def(
        "sample_joint",
        [](std::size_t n, const ParameterVector& theta_star, std::uint64_t seed,
           const JointModel& model) {
            return samples_to_rows(sample_joint(n, SamplerConfig{theta_star, seed}, model));
        },
        py::arg("n"), py::arg("theta_star"), py::arg("seed"), py::arg("model"));
}
