#include "docrl/jsonl.hpp"

#include "docrl/error.hpp"

namespace docrl::jsonl {

using nlohmann::json;

Reader::Reader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw ConfigError("cannot open " + path);
}

std::optional<json> Reader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      return json::parse(text);
    } catch (const json::exception&) {
      throw DataError("invalid JSON");
    }
  }
  return std::nullopt;
}

template <class T>
std::vector<T> load(const std::string& path, const std::function<T(const json&)>& parse,
                    bool skip_bad, LoadStats* stats) {
  Reader reader(path);
  std::vector<T> out;
  LoadStats local;
  while (true) {
    try {
      std::optional<json> j = reader.next();
      if (!j) break;
      out.push_back(parse(*j));
      ++local.records;
    } catch (const DataError& e) {
      const std::string where = path + ":" + std::to_string(reader.line()) + ": " + e.what();
      if (!skip_bad) throw DataError(where);
      ++local.skipped;
      local.warnings.push_back(where);
    }
  }
  if (stats) *stats = std::move(local);
  return out;
}

template std::vector<normalize::CorpusRecord> load(
    const std::string&, const std::function<normalize::CorpusRecord(const json&)>&, bool,
    LoadStats*);
template std::vector<bbox_eval::PageBoxes> load(
    const std::string&, const std::function<bbox_eval::PageBoxes(const json&)>&, bool, LoadStats*);
template std::vector<TestSpec> load(const std::string&,
                                    const std::function<TestSpec(const json&)>&, bool,
                                    LoadStats*);
template std::vector<Rollout> load(const std::string&, const std::function<Rollout(const json&)>&,
                                   bool, LoadStats*);

// ---------------------------------------------------------------------------

const json& field(const json& j, const char* name) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  const auto it = j.find(name);
  if (it == j.end()) throw DataError(std::string("missing field '") + name + "'");
  return *it;
}

std::string get_string(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) throw DataError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> get_optional_string(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name) || j[name].is_null()) return std::nullopt;
  return get_string(j, name);
}

bool get_bool(const json& j, const char* name, std::optional<bool> fallback) {
  if (fallback && (!j.contains(name) || j[name].is_null())) return *fallback;
  const json& v = field(j, name);
  if (!v.is_boolean()) throw DataError(std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

std::size_t get_count(const json& j, const char* name, std::size_t fallback) {
  if (!j.contains(name) || j[name].is_null()) return fallback;
  const json& v = j[name];
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw DataError(std::string("field '") + name + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

normalize::CorpusRecord parse_corpus_record(const json& j) {
  return normalize::make_record(get_string(j, "doc_id"),
                                get_optional_string(j, "source").value_or(""),
                                get_string(j, "text"));
}

json corpus_record_json(const normalize::CorpusRecord& r) {
  return {{"doc_id", r.doc_id}, {"source", r.source}, {"text", r.text}};
}

bbox_eval::PageBoxes parse_page_boxes(const json& j) {
  bbox_eval::PageBoxes page;
  page.doc_id = get_string(j, "doc_id");
  page.subset = get_optional_string(j, "subset").value_or("all");
  const json& boxes = field(j, "boxes");
  if (!boxes.is_array()) throw DataError("field 'boxes' must be an array");
  for (const json& b : boxes) {
    if (!b.is_array() || b.size() != 4) {
      throw DataError("field 'boxes' entries must be [x1, y1, x2, y2]");
    }
    int c[4];
    for (int k = 0; k < 4; ++k) {
      if (!b[k].is_number_integer()) throw DataError("field 'boxes' coordinates must be integers");
      const long long v = b[k].get<long long>();
      if (v < 0 || v > kCoordMax) {
        throw DataError("field 'boxes' coordinate " + std::to_string(v) + " outside [0, 1000]");
      }
      c[k] = static_cast<int>(v);
    }
    const BBox box{c[0], c[1], c[2], c[3]};
    if (!box.valid()) throw DataError("field 'boxes' has an inverted box " + box.to_string());
    page.boxes.push_back(box);
  }
  return page;
}

rewards::TestCase parse_test_case(const json& j) {
  const std::string type = get_string(j, "type");
  rewards::TestCase t;
  if (type == "present") {
    t = rewards::Present{get_string(j, "text"), get_count(j, "max_edit_distance", 0)};
  } else if (type == "absent") {
    t = rewards::Absent{get_string(j, "text")};
  } else if (type == "order") {
    t = rewards::Order{get_string(j, "before"), get_string(j, "after")};
  } else if (type == "math") {
    t = rewards::MathRenders{};
  } else if (type == "header_footer_present") {
    t = rewards::HeaderFooterPresent{get_string(j, "text"), get_count(j, "max_edit_distance", 0)};
  } else {
    throw DataError("field 'type' has unknown test type '" + type + "'");
  }
  rewards::validate_test(t);
  return t;
}

TestSpec parse_test_spec(const json& j) {
  TestSpec spec;
  spec.doc_id = get_string(j, "doc_id");
  const json& tests = field(j, "tests");
  if (!tests.is_array()) throw DataError("field 'tests' must be an array");
  for (const json& t : tests) spec.tests.push_back(parse_test_case(t));
  spec.gt_output = get_optional_string(j, "gt_output");
  return spec;
}

Rollout parse_rollout(const json& j) {
  return {get_string(j, "doc_id"), get_string(j, "output"), get_bool(j, "eos", true)};
}

Rollout parse_generation(const json& j) {
  Rollout r;
  r.doc_id = get_string(j, "doc_id");
  if (j.contains("output")) {
    r.output = get_string(j, "output");
  } else if (j.contains("text")) {
    r.output = get_string(j, "text");
  } else {
    throw DataError("missing field 'output'");
  }
  return r;
}

}  // namespace docrl::jsonl
