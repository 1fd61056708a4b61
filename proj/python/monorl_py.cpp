// Python bindings: registries, training, run parsing, reports and direct
// environment stepping.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "monorl/algorithms/train.hpp"
#include "monorl/cli/commands.hpp"
#include "monorl/envs/env.hpp"
#include "monorl/error.hpp"
#include "monorl/nn/rng.hpp"
#include "monorl/tracking/curves.hpp"

namespace py = pybind11;
using namespace monorl;

namespace {

py::object ToPython(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json FromPython(const py::handle& obj) {
  return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

const char* SpaceName(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::kDiscrete:
      return "discrete";
    case SpaceKind::kContinuous:
      return "continuous";
    case SpaceKind::kDiscreteMasked:
      return "discrete_masked";
  }
  return "unknown";
}

py::dict SpaceDict(const ActionSpace& space) {
  py::dict d;
  d["kind"] = SpaceName(space.kind);
  d["n"] = space.n;
  if (space.kind == SpaceKind::kContinuous) {
    d["low"] = space.low;
    d["high"] = space.high;
  }
  return d;
}

py::array_t<float> ToArray(const std::vector<float>& v) {
  return py::array_t<float>(static_cast<py::ssize_t>(v.size()), v.data());
}

// Single environment with its own seeded reset stream.
class PyEnv {
 public:
  PyEnv(const std::string& id, uint64_t seed) : env_(MakeEnv(id)), rng_(seed) {}

  py::array_t<float> Reset() { return ToArray(env_->Reset(rng_)); }

  py::tuple Step(const py::object& action) {
    EnvStep s;
    if (env_->action_space().kind == SpaceKind::kContinuous) {
      const auto a = action.cast<std::vector<double>>();
      s = env_->StepContinuous(a);
    } else {
      s = env_->StepDiscrete(action.cast<int>());
    }
    py::dict info;
    if (s.info) {
      info["episodic_return"] = s.info->episodic_return;
      info["episodic_length"] = s.info->episodic_length;
    }
    return py::make_tuple(ToArray(s.obs), s.reward, s.terminated, s.truncated, info);
  }

  std::vector<bool> ActionMask() const {
    const auto m = env_->ActionMask();
    return {m.begin(), m.end()};
  }

  std::string Id() const { return std::string(env_->id()); }
  int ObservationDim() const { return env_->observation_dim(); }
  py::dict Space() const { return SpaceDict(env_->action_space()); }

 private:
  std::unique_ptr<Env> env_;
  Rng rng_;
};

py::dict RunToDict(const RunData& run) {
  py::dict d;
  d["dir"] = run.dir;
  d["manifest"] = ToPython(run.manifest.ToJson());
  py::list events;
  for (const MetricEvent& e : run.events) {
    events.append(py::make_tuple(e.step, e.key, e.value, e.wall_time_s));
  }
  d["events"] = events;
  py::list timing;
  for (const MetricEvent& e : run.timing) {
    timing.append(py::make_tuple(e.step, e.key, e.value, e.wall_time_s));
  }
  d["timing"] = timing;
  if (run.status) {
    d["status"] = py::dict(py::arg("completed") = run.status->completed,
                           py::arg("total_events") = run.status->total_events);
  } else {
    d["status"] = py::none();
  }
  d["warnings"] = run.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(monorl, m) {
  m.doc() = "Single-file reinforcement learning algorithms with run tracking";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<TrackingError> tracking_error(m, "TrackingError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config_error.ptr(), e.what());
    } catch (const TrackingError& e) {
      PyErr_SetString(tracking_error.ptr(), e.what());
    }
  });

  m.def("list_algos", [] {
    py::list out;
    for (const AlgoInfo& a : ListAlgos()) {
      py::dict d;
      d["id"] = a.id;
      d["description"] = a.description;
      d["action_space"] = SpaceName(a.action_space);
      d["code_version"] = a.code_version;
      out.append(d);
    }
    return out;
  });

  m.def(
      "algo_defaults",
      [](const std::string& algo_id) {
        py::dict out;
        for (const ParamSpec& p : FindAlgo(algo_id).schema())
          out[p.name.c_str()] = ToPython(p.default_value);
        return out;
      },
      py::arg("algo_id"), "Default hyperparameters of an algorithm, in schema order.");

  m.def("list_envs", [] {
    py::list out;
    for (const EnvDescriptor& e : ListEnvs()) {
      py::dict d;
      d["id"] = e.id;
      d["observation_dim"] = e.observation_dim;
      d["action_space"] = SpaceDict(e.action_space);
      out.append(d);
    }
    return out;
  });

  m.def(
      "train",
      [](const std::string& algo_id, const std::string& env_id, int64_t total_timesteps,
         uint64_t seed, const py::dict& overrides, const fs::path& runs_dir,
         const std::string& exp_name) {
        TrainRequest request;
        request.config = BuildConfigJson(FindAlgo(algo_id).schema(), algo_id, env_id, seed,
                                         total_timesteps, FromPython(overrides));
        request.runs_root = runs_dir;
        request.exp_name = exp_name.empty() ? algo_id : exp_name;
        request.invocation = "python: monorl.train";
        TrainOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = RunTraining(request);
        }
        py::dict d;
        d["run_dir"] = outcome.run_dir;
        d["env_steps"] = outcome.report.env_steps;
        d["episode_returns"] = outcome.report.episode_returns;
        d["final_mean_return"] = outcome.report.final_mean_return;
        return d;
      },
      py::arg("algo_id"), py::arg("env_id"), py::arg("total_timesteps"), py::arg("seed") = 1,
      py::arg("overrides") = py::dict(), py::arg("runs_dir") = DefaultRunsRoot(),
      py::arg("exp_name") = "",
      "Train one run and return its directory and episode returns. Overrides are validated "
      "against the algorithm's schema.");

  m.def(
      "parse_run", [](const fs::path& dir) { return RunToDict(ParseRun(dir)); }, py::arg("run_dir"),
      "Manifest, metric and timing events (step, key, value, wall_time_s), status and warnings "
      "of a run.");

  m.def("discover_runs", &DiscoverRuns, py::arg("patterns"));

  m.def(
      "ema_smooth",
      [](const std::vector<double>& values, double weight) {
        Series s;
        for (size_t i = 0; i < values.size(); ++i) s.push_back({static_cast<double>(i), values[i]});
        std::vector<double> out;
        for (const SeriesPoint& p : EmaSmooth(s, weight)) out.push_back(p.value);
        return out;
      },
      py::arg("values"), py::arg("weight"));

  m.def(
      "write_report",
      [](const std::vector<std::string>& patterns, const std::string& metric, double smoothing,
         int grid_points, const fs::path& out) {
        const ReportResult r = WriteReport(patterns, metric, smoothing, grid_points, out);
        return py::dict(py::arg("runs") = r.runs, py::arg("charts") = r.charts,
                        py::arg("curves") = r.curves);
      },
      py::arg("patterns"), py::arg("metric") = std::string(kEpisodicReturn),
      py::arg("smoothing") = 0.0, py::arg("grid_points") = 100, py::arg("out") = "report.svg");

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, uint64_t>(), py::arg("env_id"), py::arg("seed") = 0)
      .def("reset", &PyEnv::Reset)
      .def("step", &PyEnv::Step, py::arg("action"),
           "Returns (obs, reward, terminated, truncated, info); info holds episodic_return and "
           "episodic_length on the step that ends an episode.")
      .def("action_mask", &PyEnv::ActionMask)
      .def_property_readonly("id", &PyEnv::Id)
      .def_property_readonly("observation_dim", &PyEnv::ObservationDim)
      .def_property_readonly("action_space", &PyEnv::Space);
}
