#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "docrl/bbox_eval.hpp"
#include "docrl/cli.hpp"
#include "docrl/error.hpp"
#include "docrl/jsonl.hpp"
#include "docrl/merge.hpp"
#include "docrl/normalize.hpp"
#include "docrl/rewards.hpp"
#include "docrl/version.hpp"
#include "docrl/vocab_prune.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace docrl;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object opt(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::tuple box_tuple(const BBox& b) { return py::make_tuple(b.x1, b.y1, b.x2, b.y2); }

BBox to_box(const py::sequence& s) {
  if (py::len(s) != 4) throw DataError("a box needs four coordinates");
  return {s[0].cast<int>(), s[1].cast<int>(), s[2].cast<int>(), s[3].cast<int>()};
}

std::vector<BBox> to_boxes(const py::iterable& seq) {
  std::vector<BBox> out;
  for (py::handle h : seq) out.push_back(to_box(py::reinterpret_borrow<py::sequence>(h)));
  return out;
}

py::dict segment_dict(const markup::Segment& seg) {
  py::dict d;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, markup::Text>) {
          d["type"] = "text";
          d["text"] = s.text;
        } else if constexpr (std::is_same_v<T, markup::InlineMath>) {
          d["type"] = "inline_math";
          d["tex"] = s.tex;
        } else if constexpr (std::is_same_v<T, markup::DisplayMath>) {
          d["type"] = "display_math";
          d["tex"] = s.tex;
        } else if constexpr (std::is_same_v<T, markup::Image>) {
          d["type"] = "image";
          d["id"] = s.ref.id;
          d["bbox"] = s.ref.bbox ? py::object(box_tuple(*s.ref.bbox)) : py::none();
        } else if constexpr (std::is_same_v<T, markup::HtmlTable>) {
          d["type"] = "table";
          d["html"] = s.html;
        } else {
          d["type"] = "heading";
          d["level"] = s.level;
          d["text"] = s.text;
        }
      },
      seg);
  return d;
}

py::dict parse_page(const std::string& raw, bool eos) {
  const markup::PageOutput page = markup::parse_page(raw, eos);
  py::list segments;
  for (const auto& s : page.segments) segments.append(segment_dict(s));
  py::list warnings;
  for (const auto& w : page.warnings) {
    py::dict d;
    d["offset"] = w.offset;
    d["category"] = w.category;
    d["message"] = w.message;
    warnings.append(d);
  }
  py::dict out;
  out["segments"] = segments;
  out["warnings"] = warnings;
  out["terminated_with_eos"] = page.terminated_with_eos;
  return out;
}

markup::MathAllowlist allowlist_from(const std::optional<std::string>& extra) {
  markup::MathAllowlist a = markup::MathAllowlist::katex_default();
  if (extra) a.merge(markup::MathAllowlist::parse(*extra));
  return a;
}

py::dict loop_dict(const normalize::LoopReport& r) {
  py::dict d;
  d["compression_ratio"] = r.compression_ratio;
  d["flagged"] = r.flagged;
  d["threshold"] = r.threshold;
  d["warnings"] = r.warnings;
  return d;
}

py::dict normalize_document(const std::string& text, const std::vector<std::string>& watermarks,
                            double loop_threshold, double page_area_fraction) {
  normalize::PipelineConfig config;
  config.watermarks = normalize::compile_patterns(watermarks);
  config.loop_threshold = loop_threshold;
  config.page_area_fraction = page_area_fraction;
  const normalize::DocumentResult r = normalize::normalize_document(text, config);
  py::dict d;
  d["text"] = r.text;
  d["transforms"] = r.report.transforms_applied;
  d["removed_watermarks"] = r.report.removed_watermarks;
  d["canonical_case"] = std::string(normalize::to_string(r.report.canonical_case));
  d["status"] = std::string(normalize::to_string(r.conversion.status));
  d["unresolved_references"] = r.conversion.unresolved_references;
  d["loop"] = loop_dict(r.loop);
  return d;
}

rewards::BoxMap box_map(const py::dict& boxes) {
  rewards::BoxMap m;
  for (auto [k, v] : boxes) {
    std::optional<BBox> b;
    if (!v.is_none()) b = to_box(py::reinterpret_borrow<py::sequence>(v));
    m.insert(k.cast<int>(), b);
  }
  return m;
}

py::dict score_rollout(const std::string& output, const py::list& tests,
                       const std::optional<std::string>& gt_output, bool eos,
                       const std::optional<std::string>& extra_allowlist) {
  std::vector<rewards::TestCase> cases;
  for (py::handle t : tests) cases.push_back(jsonl::parse_test_case(from_py(t)));
  rewards::ScoringConfig config;
  config.allowlist = allowlist_from(extra_allowlist);
  std::optional<rewards::BoxMap> gt;
  if (gt_output) gt = rewards::box_map_from_page(markup::parse_page(*gt_output));
  const rewards::RewardBreakdown b =
      rewards::score_rollout(markup::parse_page(output, eos), cases, gt, config);
  py::dict d;
  d["unit_tests"] = opt(b.unit_test_score);
  d["repetition"] = opt(b.repetition_score);
  d["math"] = opt(b.math_score);
  d["formatting"] = opt(b.formatting_score);
  d["bbox"] = opt(b.bbox_score);
  d["aggregate"] = b.aggregate;
  return d;
}

bbox_eval::Matcher matcher_from(const std::string& name) {
  if (name == "optimal") return bbox_eval::Matcher::Optimal;
  if (name == "greedy") return bbox_eval::Matcher::Greedy;
  throw ConfigError("matcher must be 'optimal' or 'greedy'");
}

py::dict evaluate_corpus(const py::list& gt, const py::list& pred, double threshold,
                         const std::string& matcher) {
  auto pages = [](const py::list& rows) {
    std::vector<bbox_eval::PageBoxes> out;
    for (py::handle r : rows) out.push_back(jsonl::parse_page_boxes(from_py(r)));
    return out;
  };
  const auto reports = bbox_eval::evaluate_corpus(pages(gt), pages(pred), {threshold, matcher_from(matcher)});
  py::dict out;
  for (const auto& [subset, r] : reports) {
    py::dict d;
    d["f1_at_05"] = r.f1_at_05;
    d["mean_iou"] = r.mean_iou;
    d["count_accuracy"] = r.count_accuracy;
    d["pages"] = r.pages;
    d["tp"] = r.tp;
    d["fp"] = r.fp;
    d["fn"] = r.fn;
    d["gt_boxes"] = r.gt_boxes;
    out[py::str(subset)] = d;
  }
  return out;
}

std::vector<vocab::Document> documents(const std::vector<std::string>& texts) {
  std::vector<vocab::Document> docs;
  docs.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) docs.push_back({std::to_string(i), texts[i]});
  return docs;
}

py::dict prune_vocab(const std::string& tokenizer_json, const std::vector<std::string>& corpus,
                     std::size_t target, const std::optional<std::vector<std::string>>& verify,
                     unsigned workers) {
  const vocab::BpeModel model = vocab::BpeModel::from_json(json::parse(tokenizer_json));
  const auto docs = documents(corpus);
  const vocab::FreqTable freq =
      vocab::propagate_frequencies(vocab::count_frequencies(docs, model, workers), model);
  const vocab::PrunePlan plan = vocab::prune(model, freq, target);
  const vocab::IntegrityReport report =
      vocab::verify_integrity(model, plan, verify ? documents(*verify) : docs, workers);
  py::dict d;
  d["tokenizer"] = plan.model.to_json().dump();
  d["plan"] = to_py(plan.to_json());
  d["report"] = to_py(report.to_json());
  d["embedding_rows"] = plan.keep_old_ids;
  return d;
}

}  // namespace

PYBIND11_MODULE(_docrl, m) {
  m.doc() = "Document transcription RL toolkit: markup, normalization, rewards, box metrics, "
            "checkpoint merging and vocabulary pruning.";
  m.attr("__version__") = kToolkitVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  // markup
  m.def("parse_page", &parse_page, py::arg("raw"), py::arg("eos") = true);
  m.def("validate_math",
        [](const std::string& tex, const std::optional<std::string>& extra_allowlist) {
          const auto r = markup::validate_math(tex, allowlist_from(extra_allowlist));
          std::vector<std::string> issues;
          for (const auto& i : r.issues) issues.push_back(i.kind);
          return py::make_tuple(r.valid, issues);
        },
        py::arg("tex"), py::arg("extra_allowlist") = py::none());

  // normalize
  m.def("sanitize", [](const std::string& text) {
    auto r = normalize::sanitize(text);
    return py::make_tuple(r.text, r.report.transforms_applied);
  });
  m.def("convert", [](const std::string& text) {
    auto r = normalize::convert_and_validate(text);
    return py::make_tuple(r.text, std::string(normalize::to_string(r.metadata.status)));
  });
  m.def("normalize_document", &normalize_document, py::arg("text"),
        py::arg("watermarks") = std::vector<std::string>{},
        py::arg("loop_threshold") = normalize::kDefaultLoopThreshold,
        py::arg("page_area_fraction") = normalize::kDefaultPageAreaFraction);
  m.def("deflate_size", [](py::bytes data) { return normalize::deflate_size(std::string(data)); });
  m.def("detect_loops",
        [](const std::string& text, double threshold) {
          return loop_dict(normalize::detect_loops(text, threshold));
        },
        py::arg("text"), py::arg("threshold") = normalize::kDefaultLoopThreshold);

  // rewards
  m.def("bbox_reward", [](const py::dict& gt, const py::dict& pred) {
    return rewards::bbox_reward(box_map(gt), box_map(pred));
  });
  m.def("iou", [](const py::sequence& a, const py::sequence& b) { return iou(to_box(a), to_box(b)); });
  m.def("score_rollout", &score_rollout, py::arg("output"), py::arg("tests"),
        py::arg("gt_output") = py::none(), py::arg("eos") = true,
        py::arg("extra_allowlist") = py::none());

  // bbox_eval
  m.def("match_boxes",
        [](const py::iterable& gt, const py::iterable& pred, double threshold,
           const std::string& matcher) {
          std::vector<py::tuple> out;
          for (const auto& mt :
               bbox_eval::match_boxes(to_boxes(gt), to_boxes(pred), threshold, matcher_from(matcher)))
            out.push_back(py::make_tuple(mt.gt_index, mt.pred_index, mt.iou));
          return out;
        },
        py::arg("gt"), py::arg("pred"), py::arg("threshold") = bbox_eval::kDefaultIouThreshold,
        py::arg("matcher") = "optimal");
  m.def("evaluate_corpus", &evaluate_corpus, py::arg("gt"), py::arg("pred"),
        py::arg("threshold") = bbox_eval::kDefaultIouThreshold, py::arg("matcher") = "optimal");

  // merge
  m.def("soup_files", &merge::soup_files, py::arg("inputs"), py::arg("output"),
        py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("task_arithmetic_files", &merge::task_arithmetic_files, py::arg("base"), py::arg("other"),
        py::arg("alpha"), py::arg("output"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("alpha_sweep_files", &merge::alpha_sweep_files, py::arg("base"), py::arg("other"),
        py::arg("alphas"), py::arg("out_dir"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());

  // vocab
  m.def("train_bpe",
        [](const std::vector<std::string>& texts, std::size_t vocab_size,
           const std::vector<std::string>& specials) {
          return vocab::train_bpe(documents(texts), vocab_size, specials).to_json().dump();
        },
        py::arg("texts"), py::arg("vocab_size"), py::arg("special_tokens") = std::vector<std::string>{});
  m.def("prune_vocab", &prune_vocab, py::arg("tokenizer_json"), py::arg("corpus"),
        py::arg("target") = vocab::kTarget32k, py::arg("verify_corpus") = py::none(),
        py::arg("workers") = 1);

  py::class_<vocab::BpeModel>(m, "BpeModel")
      .def_static("from_json", [](const std::string& s) { return vocab::BpeModel::from_json(json::parse(s)); })
      .def_static("load", &vocab::BpeModel::load)
      .def("to_json", [](const vocab::BpeModel& b) { return b.to_json().dump(); })
      .def("save", &vocab::BpeModel::save)
      .def("__len__", &vocab::BpeModel::size)
      .def("token_id", &vocab::BpeModel::id)
      .def("encode", [](const vocab::BpeModel& b, const std::string& text) {
        return vocab::Tokenizer(b).encode(text);
      })
      .def("decode", [](const vocab::BpeModel& b, const std::vector<int>& ids) {
        return py::bytes(vocab::Tokenizer(b).decode(ids));
      });

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "docrl");
    return cli::run(args);
  });
}
