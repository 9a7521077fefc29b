// Python bindings. Logs cross the boundary as XES text; models as an opaque handle.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "evabs/abstraction.hpp"
#include "evabs/eval.hpp"
#include "evabs/petri.hpp"

namespace py = pybind11;
using namespace evabs;

namespace {

abstraction::AbstractionConfig make_config(double l1, std::vector<std::size_t> ngrams, std::size_t k_max,
                                           std::uint64_t seed, std::size_t threads) {
  abstraction::AbstractionConfig c;
  c.training.l1 = l1;
  c.training.threads = threads;
  c.features.ngram_sizes = std::move(ngrams);
  c.features.k_max = k_max;
  c.features.seed = seed;
  return c;
}

xes::EventLog parse(const std::string& text) { return xes::parse_xes(std::string_view(text)); }

}  // namespace

PYBIND11_MODULE(_evabs, m) {
  m.doc() = "supervised event abstraction";

  auto base = py::register_exception<Error>(m, "EvabsError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ModelFormatError>(m, "ModelFormatError", base.ptr());

  m.def(
      "generate",
      [](std::size_t traces, std::uint64_t seed, double mean_delay) {
        petri::GeneratorOptions o;
        o.num_traces = traces;
        o.seed = seed;
        o.timestamps.mean_delay_seconds = mean_delay;
        return xes::serialize_xes(petri::generate_annotated_log(petri::medicine_eating_process(), o));
      },
      py::arg("traces") = 100, py::arg("seed") = 7, py::arg("mean_delay") = 60.0,
      "Annotated XES text played out from the built-in medicine/eating process.");

  m.def("strip_labels", [](const std::string& x) { return xes::serialize_xes(abstraction::strip_labels(parse(x))); });
  m.def("collapse", [](const std::string& x) { return xes::serialize_xes(abstraction::collapse(parse(x))); },
        "High-level XES with start/complete events per run of equal labels.");
  m.def("event_labels", [](const std::string& x) {
    std::vector<std::vector<std::string>> out;
    for (const auto& t : parse(x).traces) out.push_back(abstraction::event_labels(t));
    return out;
  });
  m.def("run_labels", &abstraction::run_labels);
  m.def("levenshtein_distance", &eval::levenshtein_distance);
  m.def("levenshtein_similarity", &eval::levenshtein_similarity);

  py::class_<crf::CrfModel>(m, "Model")
      .def_property_readonly("labels", &crf::CrfModel::labels)
      .def_property_readonly("weights", [](const crf::CrfModel& c) { return c.weights; })
      .def_property_readonly("nonzero_weights", &crf::CrfModel::nonzero_weights)
      .def_property_readonly("feature_names",
                             [](const crf::CrfModel& c) {
                               std::vector<std::string> out;
                               for (std::size_t i = 0; i < c.weights.size(); ++i) out.push_back(c.feature_name(i));
                               return out;
                             })
      .def_property_readonly("objective", [](const crf::CrfModel& c) { return c.summary.objective; })
      .def_property_readonly("iterations", [](const crf::CrfModel& c) { return c.summary.iterations; })
      .def_property_readonly("status", [](const crf::CrfModel& c) { return c.summary.status; })
      .def("annotate", [](const crf::CrfModel& c, const std::string& x) {
        return xes::serialize_xes(abstraction::annotate(c, parse(x)));
      })
      .def("save", [](const crf::CrfModel& c) { return abstraction::save_model(c); })
      .def_static("load", &abstraction::load_model_string)
      .def("__eq__", [](const crf::CrfModel& a, const crf::CrfModel& b) { return a == b; });

  m.def(
      "fit",
      [](const std::string& x, double l1, std::vector<std::size_t> ngrams, std::size_t k_max, std::uint64_t seed,
         std::size_t threads) {
        auto cfg = make_config(l1, std::move(ngrams), k_max, seed, threads);
        py::gil_scoped_release unlock;
        return abstraction::fit(parse(x), cfg);
      },
      py::arg("xes"), py::arg("l1") = 0.1, py::arg("ngrams") = std::vector<std::size_t>{1, 2, 3},
      py::arg("k_max") = 3, py::arg("seed") = 1, py::arg("threads") = 1);

  m.def(
      "evaluate_json",
      [](const std::string& x, const std::string& protocol, std::size_t folds, std::uint64_t fold_seed,
         const std::string& mode, double l1, std::size_t threads) {
        eval::EvalConfig cfg;
        cfg.abstraction = make_config(l1, {1, 2, 3}, 3, 1, 1);
        cfg.mode = eval::parse_similarity_mode(mode);
        cfg.threads = threads;
        auto log = parse(x);
        eval::AbstractionReport r;
        {
          py::gil_scoped_release unlock;
          if (protocol == "loocv")
            r = eval::leave_one_trace_out(log, cfg);
          else if (protocol == "kfold")
            r = eval::k_fold(log, folds, fold_seed, cfg);
          else
            throw ConfigError("unknown protocol '" + protocol + "' (expected loocv or kfold)");
        }
        std::ostringstream out;
        eval::write_report_json(r, out);
        return out.str();
      },
      py::arg("xes"), py::arg("protocol") = "loocv", py::arg("folds") = 10, py::arg("fold_seed") = 0,
      py::arg("mode") = "events", py::arg("l1") = 0.1, py::arg("threads") = 1);
}
