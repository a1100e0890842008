#include "roughsim/diagnostics.hpp"
#include "roughsim/experiment.hpp"
#include "roughsim/lift.hpp"
#include "roughsim/rde_solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace roughsim;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Partition make_partition(const Array& taus) {
  if (taus.ndim() != 1) throw InvalidArgument("taus: expected a 1-d array");
  return Partition(std::vector<double>(taus.data(), taus.data() + taus.size()));
}

IncrementStream make_stream(const Array& xi, const Array& Xi) {
  if (xi.ndim() != 2) throw InvalidArgument("xi: expected shape (n, d)");
  const auto n = static_cast<std::size_t>(xi.shape(0));
  const auto d = static_cast<std::size_t>(xi.shape(1));
  if (Xi.ndim() != 3 || static_cast<std::size_t>(Xi.shape(0)) != n || static_cast<std::size_t>(Xi.shape(1)) != d ||
      static_cast<std::size_t>(Xi.shape(2)) != d)
    throw InvalidArgument("Xi: expected shape (n, d, d)");
  IncrementStream s(d, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t a = 0; a < d; ++a) {
      s.xi(j)(a) = xi.at(j, a);
      for (std::size_t b = 0; b < d; ++b) s.Xi(j)(a, b) = Xi.at(j, a, b);
    }
  }
  return s;
}

py::tuple stream_arrays(const IncrementStream& s) {
  const auto n = static_cast<py::ssize_t>(s.count());
  const auto d = static_cast<py::ssize_t>(s.dim());
  Array xi({n, d});
  Array Xi({n, d, d});
  auto x = xi.mutable_unchecked<2>();
  auto X = Xi.mutable_unchecked<3>();
  for (py::ssize_t j = 0; j < n; ++j) {
    for (py::ssize_t a = 0; a < d; ++a) {
      x(j, a) = s.xi(j)(a);
      for (py::ssize_t b = 0; b < d; ++b) X(j, a, b) = s.Xi(j)(a, b);
    }
  }
  return py::make_tuple(xi, Xi);
}

Array trajectory_array(const Trajectory& t) {
  const auto rows = static_cast<py::ssize_t>(t.size());
  const auto cols = static_cast<py::ssize_t>(t.e);
  Array out({rows, cols});
  std::copy(t.values.begin(), t.values.end(), out.mutable_data());
  return out;
}

RoughStepFunction make_rsf(const Array& taus, const Array& xi, const Array& Xi, const std::string& convention) {
  return RoughStepFunction::build(make_partition(taus), make_stream(xi, Xi), parse_convention(convention));
}

VectorFieldBundle make_field(const std::string& name, const std::string& params) {
  return FieldRegistry::instance().make(name, params.empty() ? json::object() : json::parse(params));
}

py::dict matrices(const Matrix& D, const Matrix& nu) { return py::dict(py::arg("D") = D, py::arg("nu") = nu); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the roughsim C++ core";
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("chen_mul", [](const Vector& a1, const Matrix& M1, const Vector& a2, const Matrix& M2) {
    const auto p = chen_mul(TensorPair(a1, M1), TensorPair(a2, M2));
    return py::make_tuple(p.a, p.M);
  });
  m.def("decompose", [](const Vector& a, const Matrix& M) {
    const auto dec = decompose(TensorPair(a, M));
    return py::dict(py::arg("a") = dec.g.a(), py::arg("area") = dec.g.area_matrix(), py::arg("z") = dec.z.matrix(),
                    py::arg("cc_norm_upper") = cc_norm_upper(dec.g));
  });

  m.def(
      "generate",
      [](const std::string& noise, const Array& taus, std::uint64_t seed, std::uint64_t path_id) {
        const auto spec = parse_noise(json::parse(noise));
        return stream_arrays(generate(spec, make_partition(taus), seed, path_id));
      },
      py::arg("noise"), py::arg("taus"), py::arg("seed"), py::arg("path_id") = 0);
  m.def("analytic_limit", [](const std::string& noise) {
    const auto lim = analytic_limit(parse_noise(json::parse(noise)));
    return matrices(lim.D, lim.nu);
  });

  m.def(
      "increment",
      [](const Array& taus, const Array& xi, const Array& Xi, double s, double t, const std::string& convention) {
        const auto p = make_rsf(taus, xi, Xi, convention).increment(s, t);
        return py::make_tuple(p.a, p.M);
      },
      py::arg("taus"), py::arg("xi"), py::arg("Xi"), py::arg("s"), py::arg("t"),
      py::arg("convention") = "earlier_later");
  m.def(
      "holder_norm",
      [](const Array& taus, const Array& xi, const Array& Xi, double gamma, std::size_t stride) {
        const auto h = discrete_holder_parts(make_rsf(taus, xi, Xi, "earlier_later"), gamma, stride);
        return py::dict(py::arg("level1") = h.level1, py::arg("level2") = h.level2, py::arg("value") = h.value,
                        py::arg("lower_bound") = h.lower_bound);
      },
      py::arg("taus"), py::arg("xi"), py::arg("Xi"), py::arg("gamma"), py::arg("stride") = 1);

  py::class_<LiftedRoughPath>(m, "LiftedPath")
      .def(py::init([](const Array& taus, const Array& xi, const Array& Xi) {
             return lift(make_rsf(taus, xi, Xi, "earlier_later"));
           }),
           py::arg("taus"), py::arg("xi"), py::arg("Xi"))
      .def("eval",
           [](const LiftedRoughPath& l, double s, double t) {
             const auto p = l.eval(s, t);
             return py::make_tuple(p.a, p.M);
           })
      .def("path_value", &LiftedRoughPath::path_value)
      .def("holder_estimate", [](const LiftedRoughPath& l, double gamma, int levels) {
        return holder_norm_estimate(l, gamma, levels).value;
      })
      .def_property_readonly("dim", &LiftedRoughPath::dim);

  m.def(
      "run",
      [](const std::string& field, const std::string& params, const Array& taus, const Array& xi, const Array& Xi,
         const Vector& y0) { return trajectory_array(run(make_field(field, params), make_rsf(taus, xi, Xi, "earlier_later"), y0)); },
      py::arg("field"), py::arg("params"), py::arg("taus"), py::arg("xi"), py::arg("Xi"), py::arg("y0"));
  m.def(
      "solve_rde",
      [](const std::string& field, const std::string& params, const LiftedRoughPath& l, const Vector& y0,
         std::size_t substeps) {
        RdeConfig cfg;
        cfg.substeps_per_cell = substeps;
        return trajectory_array(solve_rde(make_field(field, params), l, y0, cfg));
      },
      py::arg("field"), py::arg("params"), py::arg("path"), py::arg("y0"), py::arg("substeps") = 1);
  m.def(
      "solve_modified_equation",
      [](const std::string& field, const std::string& params, const LiftedRoughPath& l, const Vector& y0,
         std::size_t steps) { return trajectory_array(solve_modified_equation(make_field(field, params), l, y0, steps)); },
      py::arg("field"), py::arg("params"), py::arg("path"), py::arg("y0"), py::arg("steps_per_piece") = 4);

  m.def("rate_fit", [](const std::vector<double>& deltas, const std::vector<double>& errors) {
    const auto f = rate_fit(deltas, errors);
    return py::dict(py::arg("slope") = f.slope, py::arg("intercept") = f.intercept, py::arg("r2") = f.r2);
  });
  m.def("ks_distance", [](const std::vector<double>& a, const std::vector<double>& b) { return ks_distance(a, b); });

  m.def("fields", [] { return FieldRegistry::instance().list(); });
  m.def("scenarios", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : scenario_catalog()) out.emplace_back(s.key, s.description);
    return out;
  });
  m.def(
      "run_experiment",
      [](const std::string& config, const std::string& report_dir) {
        std::ostringstream out, err;
        const int code = run_experiment(config, out, err, report_dir);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("config"), py::arg("report_dir") = "reports");
  m.def("philox4x64_10", &philox4x64_10, py::arg("counter"), py::arg("key"));
}
