#pragma once

// Byte-level BPE tokenizers and frequency-based vocabulary pruning.
//
// Token strings use the GPT-2 byte-to-unicode alphabet: each raw byte maps
// to one printable code point, so every vocabulary entry is valid UTF-8 and
// the 256 single-byte tokens form the fallback base.

#include <cstdint>
#include <json.hpp>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace docrl::vocab {

/// Standard pruning targets.
inline constexpr std::size_t kTarget51k = 51200;
inline constexpr std::size_t kTarget32k = 32768;
inline constexpr std::size_t kTarget16k = 16384;

/// Raw bytes -> byte-level token string.
std::string bytes_to_token(std::string_view bytes);
/// Inverse of bytes_to_token; throws DataError on characters outside the alphabet.
std::string token_to_bytes(std::string_view token);

/// Splits text into pre-tokens (contractions, letter runs, digit runs,
/// punctuation runs, whitespace) the way GPT-2 style tokenizers do.
/// Concatenating the pieces gives back the input.
std::vector<std::string_view> pretokenize(std::string_view text);

struct BpeModel {
  std::vector<std::string> tokens;  // id -> token string
  std::unordered_map<std::string, int> vocab;
  std::vector<std::pair<std::string, std::string>> merges;
  std::vector<std::string> special_tokens;
  /// Copied through unchanged on save.
  nlohmann::json pre_tokenizer;

  std::size_t size() const { return tokens.size(); }
  int id(std::string_view token) const;  // -1 when absent
  std::vector<int> special_ids() const;
  /// Ids of the 256 single-byte tokens, indexed by byte value.
  std::vector<int> byte_ids() const;

  /// Checks the invariants (dense ids, full byte alphabet, merges closed).
  /// Throws DataError.
  void validate() const;

  /// Accepts {"vocab", "merges", "special_tokens"} or the nested
  /// {"model": {"vocab", "merges"}, "added_tokens"} layout.
  static BpeModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static BpeModel load(const std::string& path);
  void save(const std::string& path) const;

  /// Assigns the next dense id.
  int add_token(const std::string& token);
};

/// A model with only the byte alphabet plus `specials`.
BpeModel byte_level_model(const std::vector<std::string>& specials = {});

class Tokenizer {
 public:
  explicit Tokenizer(const BpeModel& model);

  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& ids) const;
  std::size_t count_tokens(std::string_view text) const;

 private:
  void encode_piece(std::string_view piece, std::vector<int>& out) const;

  const BpeModel* model_;
  std::vector<int> byte_ids_;
  std::vector<std::string> token_bytes_;
  std::unordered_map<std::uint64_t, std::pair<std::size_t, int>> ranks_;  // pair -> (rank, output)
  mutable std::unordered_map<std::string, std::vector<int>> cache_;
};

struct Document {
  std::string doc_id;
  std::string text;
};

/// Greedy BPE training; used to build fixtures and demo models.
BpeModel train_bpe(const std::vector<Document>& corpus, std::size_t vocab_size,
                   const std::vector<std::string>& specials = {});

using FreqTable = std::vector<std::uint64_t>;  // indexed by token id

FreqTable count_frequencies(const std::vector<Document>& corpus, const BpeModel& model,
                            unsigned workers = 1);

/// Adds each token's count to the constituents of every merge producing it,
/// longest tokens first, down to the byte alphabet.
FreqTable propagate_frequencies(const FreqTable& direct, const BpeModel& model);

struct PrunePlan {
  std::vector<int> keep_old_ids;  // ascending; position = new id
  std::map<int, int> remap;       // old id -> new id
  BpeModel model;

  nlohmann::json to_json() const;
};

/// Smallest feasible target: specials plus the byte alphabet.
std::size_t minimal_vocab_size(const BpeModel& model);

/// Throws ConfigError when target is below minimal_vocab_size.
PrunePlan prune(const BpeModel& model, const FreqTable& propagated, std::size_t target);

struct ScriptStats {
  std::size_t documents = 0;
  std::uint64_t old_tokens = 0;
  std::uint64_t new_tokens = 0;
  double inflation = 1.0;
};

struct IntegrityReport {
  std::size_t documents = 0;
  std::vector<std::string> round_trip_failures;
  std::uint64_t old_tokens = 0;
  std::uint64_t new_tokens = 0;
  double inflation = 1.0;
  std::map<std::string, ScriptStats> per_script;  // "latin", "cjk", "other"
  bool merge_closure = true;

  bool ok() const { return round_trip_failures.empty() && merge_closure; }
  nlohmann::json to_json() const;
};

/// Majority script of the letters in `text`.
std::string dominant_script(std::string_view text);

/// True when every merge's constituents and output are in the vocabulary.
bool has_merge_closure(const BpeModel& model);

IntegrityReport verify_integrity(const BpeModel& old_model, const PrunePlan& plan,
                                 const std::vector<Document>& corpus, unsigned workers = 1);

/// Old embedding rows to keep, one per line, in new-id order.
std::string emit_embedding_plan(const PrunePlan& plan);

}  // namespace docrl::vocab
