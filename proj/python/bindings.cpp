#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "loadsynth/checkpoint.hpp"
#include "loadsynth/config.hpp"
#include "loadsynth/diffusion.hpp"
#include "loadsynth/errors.hpp"
#include "loadsynth/metrics.hpp"
#include "loadsynth/workflows.hpp"

namespace py = pybind11;
using namespace loadsynth;

namespace {

// {customer: [(date, [48 floats]), ...]}
using PyProfiles = std::map<std::string, std::vector<std::pair<std::string, std::vector<double>>>>;

PyProfiles to_python(const data::ProfileMap& profiles) {
  PyProfiles out;
  for (const auto& [id, days] : profiles)
    for (const auto& p : days) out[id].emplace_back(format_date(p.date), std::vector<double>(p.values.begin(), p.values.end()));
  return out;
}

data::ProfileMap from_python(const PyProfiles& profiles) {
  data::ProfileMap out;
  for (const auto& [id, days] : profiles) {
    for (const auto& [date, values] : days) {
      if (values.size() != data::kSlotsPerDay) {
        throw ValidationError("profile for '" + id + "' on " + date + " has " + std::to_string(values.size()) +
                              " values, expected " + std::to_string(data::kSlotsPerDay));
      }
      data::DailyProfile p{id, parse_date(date), {}};
      std::copy(values.begin(), values.end(), p.values.begin());
      out[id].push_back(p);
    }
  }
  return out;
}

struct Model {
  ModelCheckpoint checkpoint;
  std::unique_ptr<nn::NoiseEstimator> network;

  explicit Model(ModelCheckpoint ckpt)
      : checkpoint(std::move(ckpt)), network(std::make_unique<nn::NoiseEstimator>(build_model(checkpoint))) {}

  std::vector<std::string> customers() const {
    std::vector<std::string> ids;
    for (const auto& [id, load] : checkpoint.typical_loads) ids.push_back(id);
    return ids;
  }

  PyProfiles synthesize(const std::string& customer, const std::string& start, const std::string& end,
                        std::optional<std::uint64_t> seed) const {
    data::ProfileMap out;
    out[customer] = synthesize_range(checkpoint, *network, customer, parse_date(start), parse_date(end),
                                     seed.value_or(checkpoint.config.seed));
    return to_python(out);
  }
};

}  // namespace

PYBIND11_MODULE(loadsynth, m) {
  m.doc() = "Conditional diffusion model for daily electricity load profiles";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<diffusion::NoiseSchedule>(m, "NoiseSchedule")
      .def_property_readonly("steps", &diffusion::NoiseSchedule::steps)
      .def("beta", &diffusion::NoiseSchedule::beta, py::arg("t"))
      .def("alpha", &diffusion::NoiseSchedule::alpha, py::arg("t"))
      .def("alpha_bar", &diffusion::NoiseSchedule::alpha_bar, py::arg("t"))
      .def("beta_tilde", &diffusion::NoiseSchedule::beta_tilde, py::arg("t"));
  m.def("build_schedule", &diffusion::build_schedule, py::arg("steps") = 50, py::arg("beta_start") = 0.0001,
        py::arg("beta_end") = 0.5);
  m.def(
      "forward_diffuse",
      [](const std::vector<double>& x0, int t, const std::vector<double>& epsilon, const diffusion::NoiseSchedule& s) {
        return diffusion::forward_diffuse(x0, t, epsilon, s);
      },
      py::arg("x0"), py::arg("t"), py::arg("epsilon"), py::arg("schedule"));

  m.def(
      "generate_synthetic_corpus",
      [](std::size_t customers, std::size_t days, std::uint64_t seed) {
        return to_python(data::generate_synthetic_corpus(customers, days, seed));
      },
      py::arg("customers"), py::arg("days"), py::arg("seed"));
  m.def(
      "read_profiles", [](const std::filesystem::path& path) { return to_python(data::ingest_csv(path).profiles); },
      py::arg("path"));
  m.def(
      "write_profiles",
      [](const PyProfiles& profiles, const std::filesystem::path& path) {
        data::write_profiles_csv(path, from_python(profiles));
      },
      py::arg("profiles"), py::arg("path"));

  m.def("rmse", &eval::rmse, py::arg("real"), py::arg("synthetic"));
  m.def("mae", &eval::mae, py::arg("real"), py::arg("synthetic"));
  m.def("median_bandwidth", &eval::median_bandwidth, py::arg("a"), py::arg("b"));
  m.def(
      "mmd",
      [](const eval::ProfileSet& a, const eval::ProfileSet& b, std::optional<double> bandwidth, std::uint64_t seed) {
        return eval::mmd(a, b, bandwidth, seed).value;
      },
      py::arg("real"), py::arg("synthetic"), py::arg("bandwidth") = py::none(), py::arg("seed") = 0);
  m.def(
      "wasserstein_1d",
      [](const std::vector<double>& a, const std::vector<double>& b) { return eval::wasserstein_1d(a, b); },
      py::arg("a"), py::arg("b"));

  m.def("default_config", [] { return config_to_json(RunConfig{}); });
  m.def(
      "train",
      [](const std::string& config_json, const std::filesystem::path& out_dir) {
        const TrainPaths paths = cmd_train(config_from_json(config_json), out_dir);
        return std::make_pair(paths.checkpoint, paths.log);
      },
      py::arg("config_json"), py::arg("out_dir"),
      "Trains from a JSON config (keys as in default_config()); returns (checkpoint, training log) paths.");
  m.def(
      "evaluate",
      [](const std::string& config_json, const std::filesystem::path& real, const std::filesystem::path& synthetic,
         const std::string& mode, const std::filesystem::path& out_dir) {
        return eval::report_to_json(cmd_evaluate(config_from_json(config_json), real, synthetic, mode, out_dir));
      },
      py::arg("config_json"), py::arg("real"), py::arg("synthetic"), py::arg("mode"), py::arg("out_dir"),
      "Writes metrics.csv and metrics.json to out_dir and returns the JSON report.");

  py::class_<Model>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& path) { return Model(load_checkpoint(path)); }, py::arg("path"))
      .def_property_readonly("customers", &Model::customers)
      .def_property_readonly("config", [](const Model& model) { return config_to_json(model.checkpoint.config); })
      .def("synthesize", &Model::synthesize, py::arg("customer"), py::arg("start"), py::arg("end"),
           py::arg("seed") = py::none());
}
