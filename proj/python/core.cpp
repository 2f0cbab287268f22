#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "mfstune/config.hpp"
#include "mfstune/errors.hpp"
#include "mfstune/experiment.hpp"
#include "mfstune/kriging.hpp"
#include "mfstune/mfs.hpp"
#include "mfstune/oracle.hpp"
#include "mfstune/stats.hpp"

namespace py = pybind11;
using namespace mfstune;
using nlohmann::json;

namespace {

// Configs cross the boundary as JSON text; the Python side speaks dicts.
ExperimentConfig parse(const std::string& text) {
  ExperimentConfig c = config_from_json(json::parse(text));
  c.validate();
  return c;
}

Vec3 vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

ThetaVector theta_of(const std::array<double, kThetaDim>& a) { return ThetaVector::from_array(a); }

std::vector<std::array<double, 3>> points_of(const PointSet& p) {
  std::vector<std::array<double, 3>> out;
  for (const auto& v : p.points) out.push_back({v.x(), v.y(), v.z()});
  return out;
}

PointSet point_set(const std::vector<std::array<double, 3>>& pts) {
  PointSet p;
  for (const auto& a : pts) p.points.push_back(vec3(a));
  return p;
}

py::dict outcome_dict(const TuningResult& r) {
  py::dict d;
  d["best_theta"] = r.best_theta.to_array();
  d["best_mean"] = r.best_mean;
  d["distinct"] = r.distinct;
  d["means"] = r.means;
  d["variances"] = r.variances;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MFS fictitious-boundary tuning for the three-sphere head model";

  // Translators run newest first, so the base class goes in before its subclasses.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ResumeIntegrityError>(m, "ResumeIntegrityError", PyExc_RuntimeError);

  m.def("preset", [](const std::string& name) { return to_json(ExperimentConfig::from_preset(name)).dump(); },
        py::arg("name"));
  m.def("normalize_config", [](const std::string& text) { return to_json(parse(text)).dump(); });

  m.def("spiral_points", [](std::size_t n, double radius) { return points_of(spiral_points(n, radius)); },
        py::arg("n"), py::arg("radius"));

  m.def(
      "oracle_potential",
      [](const std::string& config, std::array<double, 3> position, std::array<double, 3> moment,
         const std::vector<std::array<double, 3>>& points) {
        const ExperimentConfig c = parse(config);
        return layered_potential(c.head, {vec3(position), vec3(moment)}, point_set(points), c.oracle_tol,
                                 c.oracle_max_degree)
            .field.values;
      },
      py::arg("config"), py::arg("position"), py::arg("moment"), py::arg("points"));

  m.def(
      "forward",
      [](const std::string& config, std::array<double, kThetaDim> theta, std::array<double, 3> position,
         std::array<double, 3> moment) -> py::object {
        const ExperimentConfig c = parse(config);
        const ThetaVector t = theta_of(theta);
        if (!c.bounds.contains(t)) throw ConfigError("theta lies outside the configured bounds");
        ForwardModel model(c.head, c.mfs_options(), test_points(c), c.oracle_tol, c.oracle_max_degree,
                           c.metric);
        py::dict d;
        if (!model.prepare(t)) {
          const RankFailure f = model.solver().failure();
          d["rank_failure"] = true;
          d["rank"] = f.rank;
          d["columns"] = f.columns;
          return std::move(d);
        }
        const ForwardReport r = model.evaluate({vec3(position), vec3(moment)});
        d["rank_failure"] = false;
        d["q"] = r.quality.q;
        d["capped"] = r.quality.capped;
        d["rank"] = r.rank;
        d["columns"] = r.columns;
        d["residual_norm"] = r.residual_norm;
        d["rhs_norm"] = r.rhs_norm;
        d["sigma_max"] = r.sigma_max;
        d["sigma_min"] = r.sigma_min;
        d["oracle_degrees"] = r.oracle_degrees;
        return std::move(d);
      },
      py::arg("config"), py::arg("theta"), py::arg("position"), py::arg("moment"));

  m.def(
      "oracle_checks",
      [](const std::string& config, double stability_tol) {
        py::list out;
        for (const auto& r : oracle_checks(parse(config), stability_tol)) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["value"] = r.value;
          d["threshold"] = r.threshold;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("stability_tol") = 1e-10);

  m.def(
      "tune",
      [](const std::string& config, const std::filesystem::path& ledger, bool resume) {
        const ExperimentConfig c = parse(config);
        TuneOutcome o;
        {
          py::gil_scoped_release release;
          o = run_tune(c, ledger, resume);
        }
        py::dict d = outcome_dict(o.result);
        d["resumed"] = o.resumed;
        d["replayed_entries"] = o.replayed_entries;
        return d;
      },
      py::arg("config"), py::arg("ledger"), py::arg("resume") = false);

  m.def(
      "compare",
      [](const std::string& config, const std::filesystem::path& out_dir, int threads, bool resume) {
        const ExperimentConfig c = parse(config);
        std::vector<ReportRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_compare(c, out_dir, threads > 0 ? threads : thread_count_from_env(), resume);
        }
        return report_json(rows).dump();
      },
      py::arg("config"), py::arg("out_dir"), py::arg("threads") = 0, py::arg("resume") = false);

  m.def(
      "report", [](const std::filesystem::path& dir) { return report_json(build_report(dir)).dump(); },
      py::arg("dir"));

  m.def(
      "mann_whitney_u",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const MannWhitneyResult r = mann_whitney_u(a, b);
        py::dict d;
        d["u_a"] = r.u_a;
        d["u_b"] = r.u_b;
        d["p_value"] = r.p_value;
        d["exact"] = r.exact;
        return d;
      },
      py::arg("a"), py::arg("b"));

  m.def("expected_improvement", py::overload_cast<double, double, double>(&expected_improvement),
        py::arg("mean"), py::arg("stddev"), py::arg("best"));
}
