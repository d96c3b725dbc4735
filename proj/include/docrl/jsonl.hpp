#pragma once

#include <cstddef>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "docrl/bbox_eval.hpp"
#include "docrl/normalize.hpp"
#include "docrl/rewards.hpp"

namespace docrl::jsonl {

/// Streams one JSON value per line. Blank lines are ignored.
class Reader {
 public:
  /// Throws ConfigError when the file cannot be opened.
  explicit Reader(const std::string& path);

  /// Next parsed line; nullopt at end of file. Throws DataError naming
  /// the line on malformed JSON.
  std::optional<nlohmann::json> next();
  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Reads every line through `parse`. Errors carry "path:line:". With
/// `skip_bad`, bad lines are counted and skipped instead.
template <class T>
std::vector<T> load(const std::string& path,
                    const std::function<T(const nlohmann::json&)>& parse, bool skip_bad,
                    LoadStats* stats = nullptr);

// Field access helpers; all throw DataError naming the field.
const nlohmann::json& field(const nlohmann::json& j, const char* name);
std::string get_string(const nlohmann::json& j, const char* name);
std::optional<std::string> get_optional_string(const nlohmann::json& j, const char* name);
bool get_bool(const nlohmann::json& j, const char* name, std::optional<bool> fallback = {});
std::size_t get_count(const nlohmann::json& j, const char* name, std::size_t fallback);

// Record schemas -------------------------------------------------------------

/// {"doc_id", "source", "text"}; source defaults to "".
normalize::CorpusRecord parse_corpus_record(const nlohmann::json& j);
nlohmann::json corpus_record_json(const normalize::CorpusRecord& r);

/// {"doc_id", "subset", "boxes": [[x1,y1,x2,y2], ...]}; subset defaults to "all".
bbox_eval::PageBoxes parse_page_boxes(const nlohmann::json& j);

rewards::TestCase parse_test_case(const nlohmann::json& j);

struct TestSpec {
  std::string doc_id;
  std::vector<rewards::TestCase> tests;
  /// Reference transcription whose image placeholders give the gt boxes.
  std::optional<std::string> gt_output;
};
/// {"doc_id", "tests": [...], "gt_output"?}
TestSpec parse_test_spec(const nlohmann::json& j);

struct Rollout {
  std::string doc_id;
  std::string output;
  bool eos = true;
};
/// {"doc_id", "output", "eos"}; eos defaults to true.
Rollout parse_rollout(const nlohmann::json& j);

/// {"doc_id", "output"|"text"} for loop audits.
Rollout parse_generation(const nlohmann::json& j);

}  // namespace docrl::jsonl
