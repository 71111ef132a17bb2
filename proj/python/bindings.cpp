#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gal/balance.hpp"
#include "gal/engine.hpp"
#include "gal/experiments.hpp"
#include "gal/oracle.hpp"
#include "gal/strategy.hpp"
#include "gal/toml_lite.hpp"

namespace py = pybind11;
using namespace gal;

namespace {

std::vector<DirectionStats> stats_from(const std::vector<double>& entropies) {
    std::vector<DirectionStats> out;
    for (std::size_t i = 0; i < entropies.size(); ++i) {
        DirectionStats s;
        s.anchor_id = static_cast<int>(i);
        s.entropy = entropies[i];
        out.push_back(s);
    }
    return out;
}

RunConfig config_from_text(const std::string& text) {
    try {
        return config_from_json(Json::parse(text));
    } catch (const Json::exception& e) {
        throw ConfigError(e.what());
    }
}

ExportKind export_kind(const std::string& s) {
    if (s == "embeddings") return ExportKind::Embeddings;
    if (s == "rounds") return ExportKind::Rounds;
    if (s == "training-set") return ExportKind::TrainingSet;
    throw ConfigError("export kind must be embeddings, rounds or training-set");
}

}  // namespace

PYBIND11_MODULE(_gal, m) {
    m.doc() = "Active-learning orchestration engine";

    auto base = py::register_exception<Error>(m, "GalError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<ValidationError>(m, "ValidationError", base);
    py::register_exception<StateError>(m, "StateError", base);
    py::register_exception<PersistenceError>(m, "PersistenceError", base);
    py::register_exception<BackendError>(m, "BackendError", base);
    py::register_exception<ProtocolError>(m, "ProtocolError", base);
    py::register_exception<DomainError>(m, "DomainError", base);

    m.def("default_config", [] { return to_json(default_simulated_config()).dump(); });
    m.def("load_config", [](const std::filesystem::path& p) { return to_json(load_config_file(p)).dump(); },
          py::arg("path"));
    m.def("normalize_config", [](const std::string& text) { return to_json(config_from_text(text)).dump(); },
          py::arg("config_json"));
    m.def("toml_to_json", [](const std::string& text) { return parse_toml(text).dump(); }, py::arg("text"));

    m.def("entropy", &strategy::entropy, py::arg("beta"));
    m.def("openness", [](const std::vector<double>& e, double lambda) { return balance::openness(stats_from(e), lambda); },
          py::arg("entropies"), py::arg("lam"));
    m.def("rank_top_k", [](const std::vector<double>& e, std::size_t k) { return strategy::rank_top_k(stats_from(e), k); },
          py::arg("entropies"), py::arg("k"));
    m.def("should_stop",
          [](const std::vector<double>& e, std::size_t k, int round, int max_rounds) {
              const auto d = balance::should_stop(stats_from(e), k, round, max_rounds);
              return py::make_tuple(d.stop, std::string(to_string(d.reason)));
          },
          py::arg("entropies"), py::arg("k"), py::arg("round"), py::arg("max_rounds"));
    m.def("phi",
          [](const std::vector<double>& s, const std::vector<double>& a, const std::vector<double>& n) {
              return oracle::phi(normalize(std::span<const double>(s)), normalize(std::span<const double>(a)),
                                 normalize(std::span<const double>(n)));
          },
          py::arg("sample"), py::arg("anchor"), py::arg("non_soi"));

    m.def("compare",
          [](const std::string& config_json, const std::vector<std::string>& strategies, int seeds,
             const std::filesystem::path& out) {
              const auto cfg = config_from_text(config_json);
              std::vector<experiments::Variant> variants;
              for (const auto& s : strategies) {
                  variants.push_back(experiments::parse_variant(s));
              }
              py::gil_scoped_release release;
              const auto outcomes = experiments::compare(cfg, variants, seeds, out);
              return experiments::render_comparison_csv(outcomes, variants);
          },
          py::arg("config_json"), py::arg("strategies"), py::arg("seeds"), py::arg("out_dir"));

    py::class_<Engine>(m, "Engine")
        .def_static("init_run", [](const std::string& config_json) { return Engine::init_run(config_from_text(config_json)); },
                    py::arg("config_json"))
        .def_static("resume", [](const std::filesystem::path& dir) { return Engine::resume(dir); }, py::arg("run_dir"))
        .def("run_round", &Engine::run_round, py::call_guard<py::gil_scoped_release>())
        .def("run_until_pause", [](Engine& e) { e.run_until_pause(); }, py::call_guard<py::gil_scoped_release>())
        .def("submit_decision",
             [](Engine& e, const std::vector<std::pair<int, std::string>>& pairs) {
                 std::vector<Selection> sel;
                 for (const auto& [a, s] : pairs) {
                     sel.push_back({a, s});
                 }
                 e.submit_human_decision(sel);
             },
             py::arg("pairs"))
        .def("export", [](const Engine& e, const std::string& kind, std::optional<std::filesystem::path> out) {
                 e.export_state(export_kind(kind), out);
             },
             py::arg("kind"), py::arg("out_dir") = py::none())
        .def_property_readonly("status", [](const Engine& e) { return std::string(to_string(e.state().status)); })
        .def_property_readonly("current_round", [](const Engine& e) { return e.state().current_round; })
        .def_property_readonly("run_dir", [](const Engine& e) { return e.run_dir(); })
        .def("state_hash", [](const Engine& e) { return state_hash(e.state()); })
        .def("summary_json", [](const Engine& e) { return e.run_summary_json().dump(); })
        .def("candidates_json", [](const Engine& e) { return e.candidates_json().dump(); })
        .def("references_json", [](const Engine& e) { return e.references_json().dump(); })
        .def("rounds_json", [](const Engine& e) { return e.rounds_json().dump(); });
}
