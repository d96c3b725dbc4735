#include "docrl/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "docrl/bbox_eval.hpp"
#include "docrl/error.hpp"
#include "docrl/jsonl.hpp"
#include "docrl/merge.hpp"
#include "docrl/normalize.hpp"
#include "docrl/parallel.hpp"
#include "docrl/rewards.hpp"
#include "docrl/version.hpp"
#include "docrl/vocab_prune.hpp"

namespace docrl::cli {

using nlohmann::json;

namespace {

constexpr std::size_t kBatch = 1024;

/// Writes to a file, or stdout when the path is empty or "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw ConfigError("cannot write " + path);
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string version_text() {
  std::ostringstream s;
  s << "docrl " << kToolkitVersion << "\narchive format: " << kArchiveFormat
    << "\ntokenizer format: " << kTokenizerFormat << "\nreport schema: " << kReportSchema;
  return s.str();
}

void print_json(const json& j, bool pretty) { std::cout << (pretty ? j.dump(2) : j.dump()) << '\n'; }

void warn_skipped(const jsonl::LoadStats& stats) {
  for (const std::string& w : stats.warnings) std::cerr << "skipped " << w << '\n';
}

// normalize -------------------------------------------------------------------

struct NormalizeOptions {
  std::string in;
  std::string out;
  std::string report;
  std::vector<std::string> watermarks;
  std::string allowlist;
  double loop_threshold = normalize::kDefaultLoopThreshold;
  double page_area_fraction = normalize::kDefaultPageAreaFraction;
  double empty_page_rate = 0.0;
  long long timeout_ms = normalize::kDefaultConversionBudget.count();
  bool keep_loops = false;
};

int run_normalize(const NormalizeOptions& o, unsigned workers, bool skip_bad) {
  if (!(o.page_area_fraction > 0.0 && o.page_area_fraction <= 1.0)) {
    throw ConfigError("--page-area-fraction must be in (0, 1]");
  }
  if (!(o.empty_page_rate >= 0.0 && o.empty_page_rate <= 1.0)) {
    throw ConfigError("--empty-page-rate must be in [0, 1]");
  }
  if (o.timeout_ms <= 0) throw ConfigError("--timeout-ms must be positive");
  normalize::detect_loops("", o.loop_threshold);  // validates the threshold

  normalize::PipelineConfig config;
  config.watermarks = normalize::compile_patterns(o.watermarks);
  if (!o.allowlist.empty()) config.allowlist.merge(markup::MathAllowlist::load(o.allowlist));
  config.loop_threshold = o.loop_threshold;
  config.page_area_fraction = o.page_area_fraction;
  config.conversion_budget = std::chrono::milliseconds(o.timeout_ms);

  jsonl::Reader reader(o.in);
  Sink out(o.out);
  std::unique_ptr<Sink> report = o.report.empty() ? nullptr : std::make_unique<Sink>(o.report);
  normalize::Deduplicator dedup;
  std::size_t records = 0, skipped = 0, loops = 0, blank = 0, blank_kept = 0, written = 0;

  bool done = false;
  while (!done) {
    std::vector<normalize::CorpusRecord> batch;
    while (batch.size() < kBatch) {
      try {
        std::optional<json> j = reader.next();
        if (!j) {
          done = true;
          break;
        }
        batch.push_back(jsonl::parse_corpus_record(*j));
      } catch (const DataError& e) {
        const std::string where = o.in + ":" + std::to_string(reader.line()) + ": " + e.what();
        if (!skip_bad) throw DataError(where);
        std::cerr << "skipped " << where << '\n';
        ++skipped;
      }
    }
    const auto results = parallel_map(batch.size(), workers, [&](std::size_t i) {
      return normalize::normalize_document(batch[i].text, config);
    });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ++records;
      const normalize::DocumentResult& r = results[i];
      normalize::CorpusRecord rec =
          normalize::make_record(batch[i].doc_id, batch[i].source, r.text);
      std::string drop;
      if (r.report.canonical_case == normalize::CanonicalCase::BlankPage) {
        const double rate = o.empty_page_rate;
        const auto k = static_cast<double>(blank++);
        if (std::floor((k + 1) * rate) > std::floor(k * rate)) {
          ++blank_kept;
        } else {
          drop = "blank_page";
        }
      } else if (r.loop.flagged && !o.keep_loops) {
        drop = "loop";
        ++loops;
      } else if (!dedup.offer(rec)) {
        drop = "duplicate";
      }
      if (drop.empty()) {
        out.out() << jsonl::corpus_record_json(rec).dump() << '\n';
        ++written;
      }
      if (report) {
        json line = {{"doc_id", rec.doc_id},
                     {"transforms_applied", r.report.transforms_applied},
                     {"removed_watermarks", r.report.removed_watermarks},
                     {"canonical_case", normalize::to_string(r.report.canonical_case)},
                     {"status", normalize::to_string(r.conversion.status)},
                     {"unresolved_references", r.conversion.unresolved_references},
                     {"missing_figure_numbering", r.conversion.missing_figure_numbering},
                     {"math_compatible", r.conversion.math_compatible},
                     {"compression_ratio", r.loop.compression_ratio},
                     {"flagged", r.loop.flagged},
                     {"kept", drop.empty()},
                     {"drop_reason", drop.empty() ? json(nullptr) : json(drop)},
                     {"warnings", r.report.warnings}};
        report->out() << line.dump() << '\n';
      }
    }
  }

  json per_source = json::object();
  for (const auto& [src, s] : dedup.stats().per_source) {
    per_source[src] = {{"kept", s.kept}, {"duplicates", s.dropped}};
  }
  std::cerr << json{{"records", records},
                    {"written", written},
                    {"duplicates", dedup.stats().dropped},
                    {"loops_dropped", loops},
                    {"blank_pages", blank},
                    {"blank_pages_kept", blank_kept},
                    {"skipped_bad_lines", skipped},
                    {"per_source", per_source}}
                   .dump()
            << '\n';
  return kExitOk;
}

// score-rewards -----------------------------------------------------------------

struct RewardOptions {
  std::string tests;
  std::string rollouts;
  std::string out;
  std::string allowlist;
  double loop_threshold = normalize::kDefaultLoopThreshold;
  double repetition_ramp = 0.0;
  double artifact_penalty = rewards::kDefaultArtifactPenalty;
  rewards::RewardWeights weights;
};

int run_score_rewards(const RewardOptions& o, unsigned workers, bool skip_bad) {
  rewards::ScoringConfig config;
  if (!o.allowlist.empty()) config.allowlist.merge(markup::MathAllowlist::load(o.allowlist));
  normalize::detect_loops("", o.loop_threshold);
  config.repetition.threshold = o.loop_threshold;
  config.repetition.partial_credit_ramp = o.repetition_ramp;
  config.artifact_penalty = o.artifact_penalty;
  config.weights = o.weights;
  for (double w : {o.weights.unit_tests, o.weights.repetition, o.weights.math,
                   o.weights.formatting, o.weights.bbox}) {
    if (!(w >= 0.0)) throw ConfigError("reward weights must be >= 0");
  }
  if (o.repetition_ramp < 0.0) throw ConfigError("--repetition-ramp must be >= 0");
  if (o.artifact_penalty < 0.0) throw ConfigError("--artifact-penalty must be >= 0");

  jsonl::LoadStats spec_stats;
  const auto specs = jsonl::load<jsonl::TestSpec>(o.tests, jsonl::parse_test_spec, skip_bad,
                                                  &spec_stats);
  warn_skipped(spec_stats);
  std::map<std::string, const jsonl::TestSpec*> by_doc;
  std::map<std::string, rewards::BoxMap> gt_boxes;
  for (const jsonl::TestSpec& s : specs) {
    if (!by_doc.emplace(s.doc_id, &s).second) {
      throw DataError(o.tests + ": duplicate doc_id '" + s.doc_id + "'");
    }
    if (s.gt_output) gt_boxes[s.doc_id] = rewards::box_map_from_page(markup::parse_page(*s.gt_output));
  }
  jsonl::LoadStats roll_stats;
  const auto rollouts =
      jsonl::load<jsonl::Rollout>(o.rollouts, jsonl::parse_rollout, skip_bad, &roll_stats);
  warn_skipped(roll_stats);
  for (const jsonl::Rollout& r : rollouts) {
    if (!by_doc.count(r.doc_id)) {
      throw DataError(o.rollouts + ": no test spec for doc_id '" + r.doc_id + "'");
    }
  }
  const auto scores = parallel_map(rollouts.size(), workers, [&](std::size_t i) {
    const jsonl::Rollout& r = rollouts[i];
    const markup::PageOutput page = markup::parse_page(r.output, r.eos);
    const auto gt = gt_boxes.find(r.doc_id);
    std::optional<rewards::BoxMap> boxes;
    if (gt != gt_boxes.end()) boxes = gt->second;
    return rewards::score_rollout(page, by_doc.at(r.doc_id)->tests, boxes, config);
  });
  Sink out(o.out);
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const rewards::RewardBreakdown& b = scores[i];
    out.out() << json{{"doc_id", rollouts[i].doc_id},
                      {"index", i},
                      {"unit_tests", opt(b.unit_test_score)},
                      {"repetition", opt(b.repetition_score)},
                      {"math", opt(b.math_score)},
                      {"formatting", opt(b.formatting_score)},
                      {"bbox", opt(b.bbox_score)},
                      {"aggregate", b.aggregate}}
                     .dump()
              << '\n';
  }
  return kExitOk;
}

// bbox-eval ---------------------------------------------------------------------

struct BboxOptions {
  std::string gt;
  std::string pred;
  std::string out;
  double threshold = bbox_eval::kDefaultIouThreshold;
  std::string matcher = "optimal";
  bool pretty = false;
};

int run_bbox_eval(const BboxOptions& o, bool skip_bad) {
  bbox_eval::EvalConfig config;
  config.iou_threshold = o.threshold;
  config.matcher = o.matcher == "greedy" ? bbox_eval::Matcher::Greedy : bbox_eval::Matcher::Optimal;
  jsonl::LoadStats gs;
  jsonl::LoadStats ps;
  const auto gt = jsonl::load<bbox_eval::PageBoxes>(o.gt, jsonl::parse_page_boxes, skip_bad, &gs);
  const auto pred =
      jsonl::load<bbox_eval::PageBoxes>(o.pred, jsonl::parse_page_boxes, skip_bad, &ps);
  warn_skipped(gs);
  warn_skipped(ps);
  const auto reports = bbox_eval::evaluate_corpus(gt, pred, config);
  json j = json::object();
  for (const auto& [subset, r] : reports) {
    j[subset] = {{"f1_at_05", r.f1_at_05},   {"mean_iou", r.mean_iou},
                 {"count_accuracy", r.count_accuracy}, {"pages", r.pages},
                 {"tp", r.tp},               {"fp", r.fp},
                 {"fn", r.fn},               {"gt_boxes", r.gt_boxes}};
  }
  if (!o.out.empty()) {
    Sink out(o.out);
    out.out() << j.dump(2) << '\n';
  }
  if (o.pretty) {
    std::cout << std::left << std::setw(20) << "subset" << std::right << std::setw(8) << "pages"
              << std::setw(10) << "F1@0.5" << std::setw(10) << "mIoU" << std::setw(12)
              << "count acc" << '\n';
    for (const auto& [subset, r] : reports) {
      std::cout << std::left << std::setw(20) << subset << std::right << std::setw(8) << r.pages
                << std::fixed << std::setprecision(4) << std::setw(10) << r.f1_at_05
                << std::setw(10) << r.mean_iou << std::setprecision(2) << std::setw(11)
                << r.count_accuracy << "%" << '\n';
    }
  } else if (o.out.empty()) {
    print_json(j, false);
  }
  return kExitOk;
}

// detect-loops ------------------------------------------------------------------

struct LoopOptions {
  std::string in;
  std::string out;
  double threshold = normalize::kDefaultLoopThreshold;
  bool pretty = false;
};

int run_detect_loops(const LoopOptions& o, unsigned workers, bool skip_bad) {
  normalize::detect_loops("", o.threshold);
  jsonl::LoadStats stats;
  const auto gens = jsonl::load<jsonl::Rollout>(o.in, jsonl::parse_generation, skip_bad, &stats);
  warn_skipped(stats);
  const auto reports = parallel_map(gens.size(), workers, [&](std::size_t i) {
    return normalize::detect_loops(gens[i].output, o.threshold);
  });
  std::size_t flagged = 0;
  std::size_t short_records = 0;
  std::unique_ptr<Sink> out = o.out.empty() ? nullptr : std::make_unique<Sink>(o.out);
  for (std::size_t i = 0; i < gens.size(); ++i) {
    flagged += reports[i].flagged ? 1 : 0;
    short_records += reports[i].warnings.empty() ? 0 : 1;
    if (out) {
      out->out() << json{{"doc_id", gens[i].doc_id},
                         {"compression_ratio", reports[i].compression_ratio},
                         {"flagged", reports[i].flagged}}
                        .dump()
                 << '\n';
    }
  }
  const double pct = gens.empty() ? 0.0 : 100.0 * static_cast<double>(flagged) /
                                              static_cast<double>(gens.size());
  const json summary = {{"records", gens.size()},
                        {"flagged", flagged},
                        {"percent_loopy", pct},
                        {"threshold", o.threshold},
                        {"below_min_length", short_records},
                        {"skipped_bad_lines", stats.skipped}};
  if (o.pretty) {
    std::cout << "records " << gens.size() << "\nflagged " << flagged << "\n% loopy "
              << std::fixed << std::setprecision(2) << pct << '\n';
  } else {
    print_json(summary, false);
  }
  return kExitOk;
}

// merges ------------------------------------------------------------------------

struct MergeOptions {
  std::vector<std::string> inputs;
  std::vector<double> alphas;
  std::string out;
};

int run_merge(const MergeOptions& o, unsigned workers) {
  if (o.inputs.size() != 2) throw ConfigError("merge needs --input BASE --input OTHER");
  if (o.alphas.size() != 1) throw ConfigError("merge needs exactly one --alpha");
  merge::task_arithmetic_files(o.inputs[0], o.inputs[1], o.alphas[0], o.out, workers);
  print_json({{"output", o.out}, {"alpha", o.alphas[0]}}, false);
  return kExitOk;
}

int run_soup(const MergeOptions& o, unsigned workers) {
  if (o.inputs.empty()) throw ConfigError("soup needs at least one --input");
  merge::soup_files(o.inputs, o.out, workers);
  print_json({{"output", o.out}, {"inputs", o.inputs.size()}}, false);
  return kExitOk;
}

int run_alpha_sweep(const MergeOptions& o, unsigned workers) {
  if (o.inputs.size() != 2) throw ConfigError("alpha-sweep needs --input BASE --input OTHER");
  if (o.alphas.empty()) throw ConfigError("alpha-sweep needs at least one --alpha");
  const auto paths = merge::alpha_sweep_files(o.inputs[0], o.inputs[1], o.alphas, o.out, workers);
  json j = json::array();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    j.push_back({{"alpha", o.alphas[i]}, {"output", paths[i]}});
  }
  print_json(j, false);
  return kExitOk;
}

// prune-vocab -------------------------------------------------------------------

struct PruneOptions {
  std::string tokenizer;
  std::string corpus;
  std::string verify_corpus;
  std::size_t target = vocab::kTarget32k;
  std::string out;
};

int run_prune_vocab(const PruneOptions& o, unsigned workers, bool skip_bad) {
  const vocab::BpeModel model = vocab::BpeModel::load(o.tokenizer);
  auto load_docs = [&](const std::string& path) {
    jsonl::LoadStats stats;
    const auto recs = jsonl::load<normalize::CorpusRecord>(path, jsonl::parse_corpus_record,
                                                           skip_bad, &stats);
    warn_skipped(stats);
    std::vector<vocab::Document> docs;
    for (const auto& r : recs) docs.push_back({r.doc_id, r.text});
    return docs;
  };
  const std::vector<vocab::Document> docs = load_docs(o.corpus);
  const vocab::FreqTable direct = vocab::count_frequencies(docs, model, workers);
  const vocab::FreqTable prop = vocab::propagate_frequencies(direct, model);
  const vocab::PrunePlan plan = vocab::prune(model, prop, o.target);
  const std::vector<vocab::Document> check =
      o.verify_corpus.empty() ? docs : load_docs(o.verify_corpus);
  const vocab::IntegrityReport report = vocab::verify_integrity(model, plan, check, workers);

  namespace fs = std::filesystem;
  fs::create_directories(o.out);
  const fs::path dir(o.out);
  plan.model.save((dir / "tokenizer.json").string());
  Sink((dir / "prune_plan.json").string()).out() << plan.to_json().dump() << '\n';
  Sink((dir / "embedding_rows.txt").string()).out() << vocab::emit_embedding_plan(plan);
  json rj = report.to_json();
  rj["old_vocab_size"] = model.size();
  rj["new_vocab_size"] = plan.model.size();
  rj["target"] = o.target;
  Sink((dir / "integrity_report.json").string()).out() << rj.dump(2) << '\n';
  print_json(rj, false);
  if (!report.ok()) {
    std::cerr << "integrity check failed\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv) {
  CLI::App app{"Document-OCR RL toolkit: corpus normalization, rewards, box metrics, "
               "checkpoint merging and vocabulary pruning"};
  app.set_version_flag("--version", version_text());
  app.set_config("--config", "", "TOML/INI file mirroring the flags (flags win)");
  app.require_subcommand(1);
  app.fallthrough();

  unsigned workers = 1;
  bool skip_bad = false;
  app.add_option("--workers", workers, "Worker threads; output does not depend on it")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  app.add_flag("--skip-bad", skip_bad, "Skip malformed JSONL lines instead of failing");

  NormalizeOptions norm;
  auto* n = app.add_subcommand("normalize", "Normalize, filter and deduplicate a JSONL corpus");
  n->add_option("--in", norm.in, "Input corpus JSONL {doc_id, source, text}")
      ->required()
      ->check(CLI::ExistingFile);
  n->add_option("--out", norm.out, "Output corpus JSONL")->required();
  n->add_option("--report", norm.report, "Per-document report JSONL");
  n->add_option("--watermark", norm.watermarks, "Watermark pattern (literal, or re:<regex>)");
  n->add_option("--allowlist", norm.allowlist, "Extra math commands, one per line")
      ->check(CLI::ExistingFile);
  n->add_option("--loop-threshold", norm.loop_threshold, "DEFLATE ratio cutoff")
      ->capture_default_str();
  n->add_option("--page-area-fraction", norm.page_area_fraction,
                "Area fraction that makes a lone image a full-page image")
      ->capture_default_str();
  n->add_option("--empty-page-rate", norm.empty_page_rate,
                "Fraction of blank pages re-injected into the output")
      ->capture_default_str();
  n->add_option("--timeout-ms", norm.timeout_ms, "Conversion budget per document")
      ->capture_default_str();
  n->add_flag("--keep-loops", norm.keep_loops, "Keep flagged repetition loops");

  RewardOptions rew;
  auto* r = app.add_subcommand("score-rewards", "Score rollouts against per-page unit tests");
  r->add_option("--tests", rew.tests, "Test specs JSONL {doc_id, tests, gt_output?}")
      ->required()
      ->check(CLI::ExistingFile);
  r->add_option("--rollouts", rew.rollouts, "Rollouts JSONL {doc_id, output, eos}")
      ->required()
      ->check(CLI::ExistingFile);
  r->add_option("--out", rew.out, "Output JSONL (default stdout)");
  r->add_option("--allowlist", rew.allowlist, "Extra math commands, one per line")
      ->check(CLI::ExistingFile);
  r->add_option("--loop-threshold", rew.loop_threshold, "DEFLATE ratio cutoff")
      ->capture_default_str();
  r->add_option("--repetition-ramp", rew.repetition_ramp,
                "Partial credit ramp width above the threshold (0 = binary)")
      ->capture_default_str();
  r->add_option("--artifact-penalty", rew.artifact_penalty, "Penalty per formatting artifact")
      ->capture_default_str();
  r->add_option("--w-unit-tests", rew.weights.unit_tests)->capture_default_str();
  r->add_option("--w-repetition", rew.weights.repetition)->capture_default_str();
  r->add_option("--w-math", rew.weights.math)->capture_default_str();
  r->add_option("--w-formatting", rew.weights.formatting)->capture_default_str();
  r->add_option("--w-bbox", rew.weights.bbox)->capture_default_str();

  BboxOptions bb;
  auto* b = app.add_subcommand("bbox-eval", "F1@0.5, mean IoU and count accuracy per subset");
  b->add_option("--gt", bb.gt, "Ground truth JSONL {doc_id, subset, boxes}")
      ->required()
      ->check(CLI::ExistingFile);
  b->add_option("--pred", bb.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  b->add_option("--out", bb.out, "Report JSON path");
  // Section 3.4: a box counts as correct at IoU >= 0.5.
  b->add_option("--threshold", bb.threshold, "IoU threshold")->capture_default_str();
  b->add_option("--matcher", bb.matcher, "Box matching")
      ->check(CLI::IsMember({"optimal", "greedy"}))
      ->capture_default_str();
  b->add_flag("--pretty", bb.pretty, "Human-readable table");

  LoopOptions lp;
  auto* l = app.add_subcommand("detect-loops", "Flag repetition loops by compression ratio");
  l->add_option("--in", lp.in, "Generations JSONL {doc_id, output}")
      ->required()
      ->check(CLI::ExistingFile);
  l->add_option("--out", lp.out, "Per-record flags JSONL");
  l->add_option("--threshold", lp.threshold, "DEFLATE ratio cutoff")->capture_default_str();
  l->add_flag("--pretty", lp.pretty, "Human-readable summary");

  MergeOptions mo;
  auto* m = app.add_subcommand("merge", "Task arithmetic: base + alpha * (other - base)");
  m->add_option("--input", mo.inputs, "BASE then OTHER archive")->required()->check(CLI::ExistingFile);
  m->add_option("--alpha", mo.alphas, "Interpolation strength in [0, 1]")->required();
  m->add_option("--out", mo.out, "Output archive")->required();

  MergeOptions so;
  auto* s = app.add_subcommand("soup", "Elementwise mean of checkpoints");
  s->add_option("--input", so.inputs, "Input archives")->required()->check(CLI::ExistingFile);
  s->add_option("--out", so.out, "Output archive")->required();

  MergeOptions sw;
  auto* w = app.add_subcommand("alpha-sweep", "One task-arithmetic merge per alpha");
  w->add_option("--input", sw.inputs, "BASE then OTHER archive")->required()->check(CLI::ExistingFile);
  w->add_option("--alpha", sw.alphas, "Alpha values")->required();
  w->add_option("--out", sw.out, "Output directory")->required();

  PruneOptions po;
  auto* p = app.add_subcommand("prune-vocab", "Frequency-based BPE vocabulary pruning");
  p->add_option("--tokenizer", po.tokenizer, "Tokenizer JSON")->required()->check(CLI::ExistingFile);
  p->add_option("--corpus", po.corpus, "Corpus JSONL {doc_id, text}")
      ->required()
      ->check(CLI::ExistingFile);
  p->add_option("--verify-corpus", po.verify_corpus, "Corpus for the integrity report")
      ->check(CLI::ExistingFile);
  // Usual targets: 51200, 32768, 16384.
  p->add_option("--target", po.target, "Target vocabulary size")->capture_default_str();
  p->add_option("--out", po.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (n->parsed()) return run_normalize(norm, workers, skip_bad);
    if (r->parsed()) return run_score_rewards(rew, workers, skip_bad);
    if (b->parsed()) return run_bbox_eval(bb, skip_bad);
    if (l->parsed()) return run_detect_loops(lp, workers, skip_bad);
    if (m->parsed()) return run_merge(mo, workers);
    if (s->parsed()) return run_soup(so, workers);
    if (w->parsed()) return run_alpha_sweep(sw, workers);
    if (p->parsed()) return run_prune_vocab(po, workers, skip_bad);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace docrl::cli
