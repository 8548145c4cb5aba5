#include "csc/analytics.hpp"
#include "csc/assessment.hpp"
#include "csc/challenge.hpp"
#include "csc/error.hpp"
#include "csc/game.hpp"
#include "csc/sandbox.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the shapes are the ones the CLI and
// HTTP layer emit.
py::object to_python(const json& j)
{
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_python(const py::handle& obj)
{
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

csc::Pmf pmf(const std::vector<double>& probs)
{
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < probs.size(); ++i)
    labels.push_back(std::to_string(i + 1));
  return {labels, probs};
}

py::dict response_dict(const csc::LikertResponse& r)
{
  py::dict d;
  d["participant_id"] = r.participant_id;
  d["qid"] = r.qid;
  d["value"] = r.value;
  d["cycle"] = r.cycle;
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Secure-coding challenge platform core";

  static py::exception<csc::Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const csc::Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      instance.attr("code") = e.code();
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  m.def(
    "parse_survey_csv",
    [](const std::string& text) {
      py::list out;
      for (const auto& r : csc::parse_survey_csv(text))
        out.append(response_dict(r));
      return out;
    },
    py::arg("text"), "Parses participant_id,qid,value[,cycle] rows into dicts.");

  m.def(
    "survey_report",
    [](const std::string& csv_text, const py::object& construct_map, const std::string& pooling) {
      auto responses = csc::parse_survey_csv(csv_text);
      auto map = construct_map.is_none() ? csc::ConstructMap::defaults()
                                         : csc::construct_map_from_json(from_python(construct_map));
      if (pooling != "response" && pooling != "question")
        throw py::value_error("pooling must be 'response' or 'question'");
      auto mode = pooling == "question" ? csc::Pooling::QuestionAveraged : csc::Pooling::ResponseWeighted;
      return to_python(csc::survey_report(responses, map, mode));
    },
    py::arg("csv_text"), py::arg("construct_map") = py::none(), py::arg("pooling") = "response");

  m.def(
    "hellinger", [](const std::vector<double>& p, const std::vector<double>& q) { return csc::hellinger(pmf(p), pmf(q)); },
    py::arg("p"), py::arg("q"));

  m.def(
    "tri_bin", [](const std::vector<double>& five) { return csc::tri_bin({csc::kLikertLabels, five}).probs; },
    py::arg("probs"), "NEG, NEU, POS from five Likert probabilities.");

  m.def(
    "load_bundle", [](const std::filesystem::path& dir) { return to_python(csc::to_json(csc::load_bundle(dir))); },
    py::arg("bundle_dir"));

  m.def(
    "validate_bundles",
    [](const std::vector<std::filesystem::path>& dirs, bool check_solutions) {
      std::vector<csc::ChallengeBundle> bundles;
      for (const auto& d : dirs)
        bundles.push_back(csc::load_bundle(d));
      json report;
      {
        py::gil_scoped_release release;
        if (check_solutions) {
          csc::Sandbox sandbox;
          csc::Assessor assessor(sandbox);
          report = csc::validate_event(bundles, [&](const csc::ChallengeBundle& b) { return assessor.check_solution(b); })
                     .to_json();
        }
        else
          report = csc::validate_event(bundles).to_json();
      }
      return to_python(report);
    },
    py::arg("bundle_dirs"), py::arg("check_solutions") = false);

  m.def(
    "assess",
    [](const std::filesystem::path& dir, const std::map<std::string, std::string>& files) {
      auto bundle = csc::load_bundle(dir);
      json report;
      {
        py::gil_scoped_release release;
        csc::Sandbox sandbox;
        csc::Assessor assessor(sandbox);
        report = csc::to_json(assessor.assess(bundle, files), false);
      }
      return to_python(report);
    },
    py::arg("bundle_dir"), py::arg("files") = std::map<std::string, std::string>{},
    "Assesses the starter files overlaid with `files`.");

  m.def("default_agenda", [] {
    py::list out;
    for (const auto& b : csc::default_agenda())
      out.append(py::make_tuple(std::string(csc::to_string(b.name)), b.duration_minutes));
    return out;
  });

  m.def(
    "agenda_block_at",
    [](std::int64_t minute) {
      return std::string(csc::to_string(csc::advance_agenda(csc::default_agenda(), csc::minutes(minute)).block));
    },
    py::arg("minute"), "Block of the default agenda at a clock minute.");
}
