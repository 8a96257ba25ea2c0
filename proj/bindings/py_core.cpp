// Python surface over the core operations: dataset prep, the synthetic
// generator, alias sampling, ranking metrics and the two-stage experiment
// drivers.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "icpns/alias.hpp"
#include "icpns/config.hpp"
#include "icpns/errors.hpp"
#include "icpns/ingest.hpp"
#include "icpns/metrics.hpp"
#include "icpns/pipeline.hpp"
#include "icpns/report.hpp"
#include "icpns/rng.hpp"
#include "icpns/sampler.hpp"
#include "json.hpp"

namespace py = pybind11;
using namespace icpns;

namespace {

nlohmann::json doc_from_object(const py::object& config) {
  std::string text;
  if (py::isinstance<py::str>(config)) {
    text = config.cast<std::string>();
  } else {
    py::object dumps = py::module_::import("json").attr("dumps");
    text = dumps(config).cast<std::string>();
  }
  return nlohmann::json::parse(text);
}

py::object to_python(const nlohmann::json& j) {
  py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

RunConfig config_from_object(const py::object& config) {
  RunConfig cfg = config_from_json(doc_from_object(config));
  resolve_seeds(cfg);
  validate_config(cfg);
  return cfg;
}

// Deterministic draws from a fixed weight vector.
class AliasSampler {
 public:
  AliasSampler(const std::vector<double>& weights, std::uint64_t seed)
      : table_(AliasTable::build(weights)), rng_(seed) {}

  std::int32_t draw() { return table_.draw(rng_); }

  std::vector<std::int32_t> draw_many(std::size_t n) {
    std::vector<std::int32_t> out(n);
    for (auto& v : out) v = table_.draw(rng_);
    return out;
  }

  std::vector<double> probabilities() const { return table_.reconstructed(); }

 private:
  AliasTable table_;
  Rng rng_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "negative-sampling lab core";
  m.attr("__version__") = "0.1.0";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      if (e.category() == ErrorCategory::config || e.category() == ErrorCategory::validation)
        PyErr_SetString(PyExc_ValueError, e.what());
      else
        PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  py::class_<AliasSampler>(m, "AliasSampler")
      .def(py::init<const std::vector<double>&, std::uint64_t>(), py::arg("weights"),
           py::arg("seed"))
      .def("draw", &AliasSampler::draw)
      .def("draw_many", &AliasSampler::draw_many, py::arg("n"))
      .def("probabilities", &AliasSampler::probabilities);

  m.def(
      "ranking_metrics",
      [](const std::vector<std::int32_t>& ranked, std::vector<std::int32_t> relevant, int k) {
        std::sort(relevant.begin(), relevant.end());
        MetricValues v = ranking_metrics(ranked, relevant, k);
        return py::dict(py::arg("recall") = v.recall, py::arg("ndcg") = v.ndcg,
                        py::arg("mrr") = v.mrr, py::arg("precision") = v.precision);
      },
      py::arg("ranked"), py::arg("relevant"), py::arg("k"));

  m.def(
      "kcore",
      [](const std::vector<std::pair<std::string, std::string>>& pairs, int k_user, int k_item) {
        return kcore_filter(pairs, k_user, k_item).pairs;
      },
      py::arg("pairs"), py::arg("k_user"), py::arg("k_item"));

  m.def(
      "prep",
      [](const std::string& raw, const std::string& format, int k_user, int k_item,
         const std::array<double, 3>& ratios, std::uint64_t seed, const std::string& out_dir,
         bool strict) {
        PrepStats s = prep_dataset(raw, parse_raw_format(format), k_user, k_item, ratios, seed,
                                   out_dir, strict);
        return py::dict(py::arg("raw_records") = s.raw_records,
                        py::arg("malformed_lines") = s.malformed_lines,
                        py::arg("binarized_pairs") = s.binarized_pairs,
                        py::arg("kcore_iterations") = s.kcore_iterations,
                        py::arg("n_users") = s.n_users, py::arg("n_items") = s.n_items,
                        py::arg("interactions") = s.interactions);
      },
      py::arg("raw"), py::arg("format"), py::arg("k_user"), py::arg("k_item"), py::arg("ratios"),
      py::arg("seed"), py::arg("out_dir"), py::arg("strict") = true);

  m.def(
      "generate_synthetic",
      [](std::int32_t n_users, std::int32_t n_items, std::int32_t n_communities,
         double exposure_rate, double click_rate, std::uint64_t seed, const std::string& out_dir) {
        SyntheticConfig cfg;
        cfg.n_users = n_users;
        cfg.n_items = n_items;
        cfg.n_communities = n_communities;
        cfg.exposure_rate = exposure_rate;
        cfg.click_rate = click_rate;
        cfg.seed = seed;
        SyntheticResult res = generate_synthetic(cfg);
        save_bundle(res.bundle, out_dir);
        save_exposure(res.log, std::filesystem::path(out_dir) / "exposure.tsv");
        return py::dict(py::arg("n_users") = res.bundle.maps.n_users(),
                        py::arg("n_items") = res.bundle.maps.n_items(),
                        py::arg("interactions") = res.bundle.train.nnz() + res.bundle.val.nnz() +
                                                      res.bundle.test.nnz());
      },
      py::arg("n_users"), py::arg("n_items"), py::arg("n_communities"),
      py::arg("exposure_rate") = 0.5, py::arg("click_rate") = 0.3, py::arg("seed") = 0,
      py::arg("out_dir") = std::string());

  m.def(
      "run_experiment",
      [](const py::object& config) {
        ExperimentReport rep = run_experiment(config_from_object(config));
        return to_python(rep.document);
      },
      py::arg("config"), "Run the two-stage pipeline; config is a dict or JSON string.");

  m.def(
      "compare_strategies",
      [](const py::object& config, const std::vector<std::string>& strategies) {
        RunConfig cfg = config_from_object(config);
        std::vector<SamplerSpec> specs;
        for (const std::string& name : strategies) {
          SamplerSpec spec = cfg.stage2;
          spec.strategy = parse_strategy(name);
          specs.push_back(spec);
        }
        ExperimentReport rep = compare_strategies(cfg, specs);
        return to_python(rep.document);
      },
      py::arg("config"), py::arg("strategies"));

  m.def(
      "canonical_report",
      [](const py::object& report) { return to_python(canonical_report(doc_from_object(report))); },
      py::arg("report"), "Strip volatile timing fields for byte-stable comparison.");
}
