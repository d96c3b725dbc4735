#include "docrl/vocab_prune.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <queue>
#include <unordered_set>

#include "docrl/error.hpp"
#include "docrl/parallel.hpp"
#include "docrl/utf8.hpp"

namespace docrl::vocab {

using nlohmann::json;

namespace {

struct ByteAlphabet {
  std::array<char32_t, 256> to_cp{};
  std::unordered_map<char32_t, unsigned char> to_byte;

  ByteAlphabet() {
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
    char32_t extra = 256;
    for (int b = 0; b < 256; ++b) {
      to_cp[b] = direct[b] ? static_cast<char32_t>(b) : extra++;
      to_byte[to_cp[b]] = static_cast<unsigned char>(b);
    }
  }
};

const ByteAlphabet& alphabet() {
  static const ByteAlphabet a;
  return a;
}

bool is_space(char32_t c) {
  return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_number(char32_t c) {
  return (c >= '0' && c <= '9') || (c >= 0xFF10 && c <= 0xFF19) || (c >= 0x660 && c <= 0x669) ||
         c == 0xB2 || c == 0xB3 || c == 0xB9 || (c >= 0xBC && c <= 0xBE);
}

// Coarse approximation of \p{L}: letters by block, minus the common
// punctuation and symbol blocks.
bool is_letter(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  if (c < 0xC0) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0xD800 && c <= 0xDFFF) return false;  // includes invalid-byte markers
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows
  if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
  if (c >= 0xFE10 && c <= 0xFE6F) return false;
  if (c >= 0xFF00 && c <= 0xFF20) return false;
  if (c >= 0xFF3B && c <= 0xFF40) return false;
  if (c >= 0xFF5B && c <= 0xFF65) return false;
  if (c >= 0xE000 && c <= 0xF8FF) return false;  // private use
  if (c == 0x30FB) return false;
  if (c == 0x37E || c == 0x387) return false;
  if (c >= 0x300 && c <= 0x36F) return false;  // combining marks
  if (is_space(c) || is_number(c)) return false;
  return true;
}

enum class CharClass { Letter, Number, Space, Other };

CharClass classify(char32_t c) {
  if (is_space(c)) return CharClass::Space;
  if (is_letter(c)) return CharClass::Letter;
  if (is_number(c)) return CharClass::Number;
  return CharClass::Other;
}

std::uint64_t pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t s = a + b;
  return s < a ? UINT64_MAX : s;
}

std::pair<std::string, std::string> split_merge(const json& m) {
  if (m.is_string()) {
    const std::string s = m.get<std::string>();
    const std::size_t sp = s.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= s.size()) {
      throw DataError("malformed merge '" + s + "'");
    }
    return {s.substr(0, sp), s.substr(sp + 1)};
  }
  if (m.is_array() && m.size() == 2 && m[0].is_string() && m[1].is_string()) {
    return {m[0].get<std::string>(), m[1].get<std::string>()};
  }
  throw DataError("merge entries must be \"left right\" strings");
}

/// For each token id, the merges that produce it.
std::vector<std::vector<std::pair<int, int>>> producers(const BpeModel& model) {
  std::vector<std::vector<std::pair<int, int>>> out(model.size());
  for (const auto& [l, r] : model.merges) {
    const int out_id = model.id(l + r);
    const int li = model.id(l);
    const int ri = model.id(r);
    if (out_id < 0 || li < 0 || ri < 0) continue;
    out[static_cast<std::size_t>(out_id)].emplace_back(li, ri);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> chunks(std::size_t n, unsigned workers) {
  const std::size_t k = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(n * i / k, n * (i + 1) / k);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string bytes_to_token(std::string_view bytes) {
  std::string out;
  for (unsigned char b : bytes) utf8::append(out, alphabet().to_cp[b]);
  return out;
}

std::string token_to_bytes(std::string_view token) {
  std::string out;
  std::size_t i = 0;
  while (i < token.size()) {
    char32_t cp = 0;
    i += utf8::next(token, i, cp);
    const auto it = alphabet().to_byte.find(cp);
    if (it == alphabet().to_byte.end()) {
      throw DataError("token '" + std::string(token) + "' is outside the byte-level alphabet");
    }
    out.push_back(static_cast<char>(it->second));
  }
  return out;
}

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> out;
  const std::size_t n = text.size();
  auto cp_at = [&](std::size_t i, char32_t& cp) { return utf8::next(text, i, cp); };
  auto run_end = [&](std::size_t i, CharClass cls) {
    while (i < n) {
      char32_t cp = 0;
      const std::size_t len = cp_at(i, cp);
      if (classify(cp) != cls) break;
      i += len;
    }
    return i;
  };

  std::size_t i = 0;
  while (i < n) {
    if (text[i] == '\'' && i + 1 < n) {
      static constexpr std::string_view kSuffixes[] = {"re", "ve", "ll", "s", "t", "m", "d"};
      bool matched = false;
      for (std::string_view s : kSuffixes) {
        if (text.substr(i + 1, s.size()) == s) {
          out.push_back(text.substr(i, s.size() + 1));
          i += s.size() + 1;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    char32_t cp = 0;
    const std::size_t len = cp_at(i, cp);
    CharClass cls = classify(cp);
    std::size_t start = i;
    std::size_t body = i;
    if (cp == ' ' && i + 1 < n) {
      char32_t next = 0;
      cp_at(i + 1, next);
      const CharClass next_cls = classify(next);
      if (next_cls != CharClass::Space) {
        cls = next_cls;
        body = i + 1;
      }
    }
    if (cls != CharClass::Space) {
      const std::size_t end = run_end(body, cls);
      out.push_back(text.substr(start, end - start));
      i = end;
      continue;
    }
    // Whitespace: leave the last space for the following word.
    const std::size_t end = run_end(i, CharClass::Space);
    std::size_t cut = end;
    if (end < n && end - i > len) {
      std::size_t last = i;
      std::size_t p = i;
      while (p < end) {
        last = p;
        p += cp_at(p, cp);
      }
      cut = last;
    }
    out.push_back(text.substr(i, cut - i));
    i = cut;
  }
  return out;
}

// ---------------------------------------------------------------------------

int BpeModel::id(std::string_view token) const {
  const auto it = vocab.find(std::string(token));
  return it == vocab.end() ? -1 : it->second;
}

std::vector<int> BpeModel::special_ids() const {
  std::vector<int> out;
  for (const std::string& s : special_tokens) {
    const int i = id(s);
    if (i >= 0) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> BpeModel::byte_ids() const {
  std::vector<int> out(256, -1);
  for (int b = 0; b < 256; ++b) {
    std::string t;
    utf8::append(t, alphabet().to_cp[b]);
    out[b] = id(t);
  }
  return out;
}

int BpeModel::add_token(const std::string& token) {
  const auto [it, inserted] = vocab.emplace(token, static_cast<int>(tokens.size()));
  if (inserted) tokens.push_back(token);
  return it->second;
}

void BpeModel::validate() const {
  if (tokens.size() != vocab.size()) throw DataError("tokenizer vocabulary ids are not dense");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty()) throw DataError("tokenizer has an empty token");
    const auto it = vocab.find(tokens[i]);
    if (it == vocab.end() || it->second != static_cast<int>(i)) {
      throw DataError("tokenizer vocabulary ids are not dense");
    }
  }
  const std::vector<int> bytes = byte_ids();
  for (int b = 0; b < 256; ++b) {
    if (bytes[b] < 0) {
      throw DataError("tokenizer is missing byte-level base token for byte " + std::to_string(b));
    }
  }
  for (const std::string& s : special_tokens) {
    if (id(s) < 0) throw DataError("special token '" + s + "' is not in the vocabulary");
  }
  for (const auto& [l, r] : merges) {
    if (id(l) < 0 || id(r) < 0 || id(l + r) < 0) {
      throw DataError("merge '" + l + " " + r + "' references a token outside the vocabulary");
    }
  }
}

BpeModel BpeModel::from_json(const json& j) {
  if (!j.is_object()) throw DataError("tokenizer file must be a JSON object");
  BpeModel m;
  const bool nested = j.contains("model") && j["model"].is_object();
  const json& body = nested ? j["model"] : j;
  if (!body.contains("vocab") || !body["vocab"].is_object()) {
    throw DataError("tokenizer field 'vocab' must be an object");
  }
  std::map<int, std::string> by_id;
  auto put = [&](const std::string& token, const json& idj) {
    if (!idj.is_number_integer() || idj.get<long long>() < 0) {
      throw DataError("tokenizer id for '" + token + "' must be a non-negative integer");
    }
    const int id = idj.get<int>();
    const auto [it, ok] = by_id.emplace(id, token);
    if (!ok && it->second != token) {
      throw DataError("tokenizer id " + std::to_string(id) + " is assigned twice");
    }
  };
  for (auto it = body["vocab"].begin(); it != body["vocab"].end(); ++it) put(it.key(), *it);
  if (nested && j.contains("added_tokens") && j["added_tokens"].is_array()) {
    for (const json& a : j["added_tokens"]) {
      const std::string content = a.value("content", "");
      put(content, a.value("id", json()));
      if (a.value("special", false)) m.special_tokens.push_back(content);
    }
  }
  if (j.contains("special_tokens")) {
    if (!j["special_tokens"].is_array()) throw DataError("'special_tokens' must be an array");
    for (const json& s : j["special_tokens"]) {
      if (!s.is_string()) throw DataError("'special_tokens' entries must be strings");
      m.special_tokens.push_back(s.get<std::string>());
    }
  }
  int expect = 0;
  for (const auto& [id, token] : by_id) {
    if (id != expect++) throw DataError("tokenizer vocabulary ids are not dense");
    if (m.vocab.count(token)) throw DataError("token '" + token + "' appears twice");
    m.add_token(token);
  }
  if (body.contains("merges")) {
    if (!body["merges"].is_array()) throw DataError("tokenizer field 'merges' must be an array");
    for (const json& mj : body["merges"]) m.merges.push_back(split_merge(mj));
  }
  if (j.contains("pre_tokenizer")) m.pre_tokenizer = j["pre_tokenizer"];
  m.validate();
  return m;
}

json BpeModel::to_json() const {
  json vocab_j = json::object();
  for (std::size_t i = 0; i < tokens.size(); ++i) vocab_j[tokens[i]] = i;
  json merges_j = json::array();
  for (const auto& [l, r] : merges) merges_j.push_back(l + " " + r);
  json out = {{"vocab", vocab_j}, {"merges", merges_j}, {"special_tokens", special_tokens}};
  if (!pre_tokenizer.is_null()) out["pre_tokenizer"] = pre_tokenizer;
  return out;
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tokenizer: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  try {
    return from_json(j);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write tokenizer: " + path);
  out << to_json().dump() << '\n';
}

BpeModel byte_level_model(const std::vector<std::string>& specials) {
  BpeModel m;
  for (int b = 0; b < 256; ++b) {
    std::string t;
    utf8::append(t, alphabet().to_cp[b]);
    m.add_token(t);
  }
  for (const std::string& s : specials) m.add_token(s);
  m.special_tokens = specials;
  return m;
}

// ---------------------------------------------------------------------------

Tokenizer::Tokenizer(const BpeModel& model) : model_(&model) {
  model.validate();
  byte_ids_ = model.byte_ids();
  const std::vector<int> specials = model.special_ids();
  token_bytes_.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (std::binary_search(specials.begin(), specials.end(), static_cast<int>(i))) {
      token_bytes_[i] = model.tokens[i];
    } else {
      token_bytes_[i] = token_to_bytes(model.tokens[i]);
    }
  }
  for (std::size_t r = 0; r < model.merges.size(); ++r) {
    const auto& [l, rt] = model.merges[r];
    ranks_.emplace(pair_key(model.id(l), model.id(rt)), std::make_pair(r, model.id(l + rt)));
  }
}

void Tokenizer::encode_piece(std::string_view piece, std::vector<int>& out) const {
  if (piece.size() <= 64) {
    const auto it = cache_.find(std::string(piece));
    if (it != cache_.end()) {
      out.insert(out.end(), it->second.begin(), it->second.end());
      return;
    }
  }
  std::vector<int> ids;
  ids.reserve(piece.size());
  for (unsigned char b : piece) ids.push_back(byte_ids_[b]);
  while (ids.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    std::uint64_t best_key = 0;
    int best_out = -1;
    for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
      const auto it = ranks_.find(pair_key(ids[k], ids[k + 1]));
      if (it != ranks_.end() && it->second.first < best_rank) {
        best_rank = it->second.first;
        best_key = it->first;
        best_out = it->second.second;
      }
    }
    if (best_out < 0) break;
    std::vector<int> next;
    next.reserve(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k + 1 < ids.size() && pair_key(ids[k], ids[k + 1]) == best_key) {
        next.push_back(best_out);
        ++k;
      } else {
        next.push_back(ids[k]);
      }
    }
    ids.swap(next);
  }
  if (piece.size() <= 64) {
    if (cache_.size() > (1u << 18)) cache_.clear();
    cache_.emplace(std::string(piece), ids);
  }
  out.insert(out.end(), ids.begin(), ids.end());
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (std::string_view piece : pretokenize(text)) encode_piece(piece, out);
  return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= token_bytes_.size()) {
      throw DataError("token id " + std::to_string(id) + " out of range");
    }
    out += token_bytes_[static_cast<std::size_t>(id)];
  }
  return out;
}

std::size_t Tokenizer::count_tokens(std::string_view text) const { return encode(text).size(); }

// ---------------------------------------------------------------------------

BpeModel train_bpe(const std::vector<Document>& corpus, std::size_t vocab_size,
                   const std::vector<std::string>& specials) {
  BpeModel model = byte_level_model(specials);
  const std::vector<int> byte_ids = model.byte_ids();

  std::unordered_map<std::string, std::uint64_t> word_counts;
  for (const Document& d : corpus) {
    for (std::string_view p : pretokenize(d.text)) ++word_counts[std::string(p)];
  }
  std::vector<std::pair<std::string, std::uint64_t>> sorted_words(word_counts.begin(),
                                                                   word_counts.end());
  std::sort(sorted_words.begin(), sorted_words.end());

  std::vector<std::vector<int>> words;
  std::vector<std::int64_t> freq;
  for (const auto& [w, c] : sorted_words) {
    std::vector<int> sym;
    for (unsigned char b : w) sym.push_back(byte_ids[b]);
    words.push_back(std::move(sym));
    freq.push_back(static_cast<std::int64_t>(c));
  }

  std::unordered_map<std::uint64_t, std::int64_t> counts;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> where;
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::size_t k = 0; k + 1 < words[w].size(); ++k) {
      const std::uint64_t key = pair_key(words[w][k], words[w][k + 1]);
      counts[key] += freq[w];
      where[key].push_back(w);
    }
  }

  using Entry = std::pair<std::int64_t, std::uint64_t>;
  auto cmp = [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
  for (const auto& [key, c] : counts) heap.emplace(c, key);

  std::vector<std::size_t> stamp(words.size(), SIZE_MAX);
  std::size_t step = 0;
  while (model.size() < vocab_size && !heap.empty()) {
    const auto [c, key] = heap.top();
    heap.pop();
    const auto cur = counts.find(key);
    if (cur == counts.end() || cur->second != c || c <= 0) continue;
    const int l = static_cast<int>(key >> 32);
    const int r = static_cast<int>(key & 0xFFFFFFFFu);
    const std::string& ls = model.tokens[static_cast<std::size_t>(l)];
    const std::string& rs = model.tokens[static_cast<std::size_t>(r)];
    model.merges.emplace_back(ls, rs);
    const int out = model.add_token(ls + rs);

    std::unordered_set<std::uint64_t> touched;
    const std::vector<std::size_t> affected = where[key];
    ++step;
    for (std::size_t w : affected) {
      if (stamp[w] == step) continue;
      stamp[w] = step;
      std::vector<int>& sym = words[w];
      bool has = false;
      for (std::size_t k = 0; k + 1 < sym.size(); ++k) {
        if (sym[k] == l && sym[k + 1] == r) has = true;
      }
      if (!has) continue;
      for (std::size_t k = 0; k + 1 < sym.size(); ++k) {
        const std::uint64_t pk = pair_key(sym[k], sym[k + 1]);
        counts[pk] -= freq[w];
        touched.insert(pk);
      }
      std::vector<int> next;
      for (std::size_t k = 0; k < sym.size(); ++k) {
        if (k + 1 < sym.size() && sym[k] == l && sym[k + 1] == r) {
          next.push_back(out);
          ++k;
        } else {
          next.push_back(sym[k]);
        }
      }
      sym.swap(next);
      for (std::size_t k = 0; k + 1 < sym.size(); ++k) {
        const std::uint64_t pk = pair_key(sym[k], sym[k + 1]);
        counts[pk] += freq[w];
        touched.insert(pk);
        if (sym[k] == out || sym[k + 1] == out) where[pk].push_back(w);
      }
    }
    std::vector<std::uint64_t> ordered(touched.begin(), touched.end());
    std::sort(ordered.begin(), ordered.end());
    for (std::uint64_t pk : ordered) {
      if (counts[pk] > 0) heap.emplace(counts[pk], pk);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------

FreqTable count_frequencies(const std::vector<Document>& corpus, const BpeModel& model,
                            unsigned workers) {
  model.validate();
  const auto ranges = chunks(corpus.size(), workers);
  const auto partial = parallel_map(ranges.size(), workers, [&](std::size_t c) {
    Tokenizer tok(model);
    FreqTable local(model.size(), 0);
    for (std::size_t d = ranges[c].first; d < ranges[c].second; ++d) {
      try {
        for (int id : tok.encode(corpus[d].text)) ++local[static_cast<std::size_t>(id)];
      } catch (const std::exception& e) {
        throw DataError("document '" + corpus[d].doc_id + "': " + e.what());
      }
    }
    return local;
  });
  FreqTable total(model.size(), 0);
  for (const FreqTable& p : partial) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }
  return total;
}

FreqTable propagate_frequencies(const FreqTable& direct, const BpeModel& model) {
  if (direct.size() != model.size()) {
    throw DataError("frequency table size does not match the vocabulary");
  }
  const auto prods = producers(model);
  std::vector<std::size_t> len(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) len[i] = utf8::decode(model.tokens[i]).size();
  std::vector<int> order(model.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return len[a] != len[b] ? len[a] > len[b] : a > b;
  });
  FreqTable prop = direct;
  for (int t : order) {
    const std::uint64_t c = prop[static_cast<std::size_t>(t)];
    if (c == 0) continue;
    for (const auto& [l, r] : prods[static_cast<std::size_t>(t)]) {
      prop[static_cast<std::size_t>(l)] = saturating_add(prop[static_cast<std::size_t>(l)], c);
      prop[static_cast<std::size_t>(r)] = saturating_add(prop[static_cast<std::size_t>(r)], c);
    }
  }
  return prop;
}

std::size_t minimal_vocab_size(const BpeModel& model) {
  const std::vector<int> specials = model.special_ids();
  std::unordered_set<int> m(specials.begin(), specials.end());
  for (int b : model.byte_ids()) m.insert(b);
  return m.size();
}

PrunePlan prune(const BpeModel& model, const FreqTable& propagated, std::size_t target) {
  model.validate();
  if (propagated.size() != model.size()) {
    throw DataError("frequency table size does not match the vocabulary");
  }
  const std::size_t minimal = minimal_vocab_size(model);
  if (target < minimal) {
    throw ConfigError("target " + std::to_string(target) +
                      " is infeasible; minimal feasible size is " + std::to_string(minimal));
  }
  const std::size_t n = model.size();
  std::vector<bool> keep(n, false);
  std::size_t kept = 0;
  for (int id : model.byte_ids()) {
    if (!keep[id]) ++kept;
    keep[id] = true;
  }
  for (int id : model.special_ids()) {
    if (!keep[id]) ++kept;
    keep[id] = true;
  }

  if (target >= n) {
    std::fill(keep.begin(), keep.end(), true);
  } else {
    const auto prods = producers(model);
    std::vector<int> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) candidates.push_back(static_cast<int>(i));
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      return propagated[a] != propagated[b] ? propagated[a] > propagated[b] : a < b;
    });
    std::vector<bool> in_closure(n, false);
    for (int c : candidates) {
      if (keep[c]) continue;
      // Everything needed to produce c that is not kept yet.
      std::vector<int> closure;
      std::vector<int> stack{c};
      in_closure[c] = true;
      while (!stack.empty()) {
        const int t = stack.back();
        stack.pop_back();
        closure.push_back(t);
        for (const auto& [l, r] : prods[t]) {
          for (int x : {l, r}) {
            if (!keep[x] && !in_closure[x]) {
              in_closure[x] = true;
              stack.push_back(x);
            }
          }
        }
      }
      for (int t : closure) in_closure[t] = false;
      if (kept + closure.size() > target) break;
      for (int t : closure) keep[t] = true;
      kept += closure.size();
    }
  }

  PrunePlan plan;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    plan.remap[static_cast<int>(i)] = static_cast<int>(plan.keep_old_ids.size());
    plan.keep_old_ids.push_back(static_cast<int>(i));
    plan.model.add_token(model.tokens[i]);
  }
  for (const auto& [l, r] : model.merges) {
    const int a = model.id(l);
    const int b = model.id(r);
    const int o = model.id(l + r);
    if (keep[a] && keep[b] && keep[o]) plan.model.merges.emplace_back(l, r);
  }
  plan.model.special_tokens = model.special_tokens;
  plan.model.pre_tokenizer = model.pre_tokenizer;
  return plan;
}

json PrunePlan::to_json() const {
  json remap_j = json::object();
  for (const auto& [o, n] : remap) remap_j[std::to_string(o)] = n;
  return {{"keep_old_ids", keep_old_ids}, {"remap", remap_j}};
}

// ---------------------------------------------------------------------------

std::string dominant_script(std::string_view text) {
  std::size_t latin = 0;
  std::size_t cjk = 0;
  std::size_t other = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t c = 0;
    i += utf8::next(text, i, c);
    if (!is_letter(c)) continue;
    if (c < 0x250 || (c >= 0x1E00 && c <= 0x1EFF)) {
      ++latin;
    } else if ((c >= 0x3040 && c <= 0x30FF) || (c >= 0x3400 && c <= 0x4DBF) ||
               (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0xAC00 && c <= 0xD7AF) ||
               (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x20000 && c <= 0x3FFFF)) {
      ++cjk;
    } else {
      ++other;
    }
  }
  if (latin == 0 && cjk == 0 && other == 0) return "other";
  if (latin >= cjk && latin >= other) return "latin";
  if (cjk >= other) return "cjk";
  return "other";
}

bool has_merge_closure(const BpeModel& model) {
  for (const auto& [l, r] : model.merges) {
    if (model.id(l) < 0 || model.id(r) < 0 || model.id(l + r) < 0) return false;
  }
  return true;
}

IntegrityReport verify_integrity(const BpeModel& old_model, const PrunePlan& plan,
                                 const std::vector<Document>& corpus, unsigned workers) {
  if (plan.keep_old_ids.size() != plan.model.size()) {
    throw DataError("prune plan does not match its model");
  }
  for (std::size_t i = 0; i < plan.keep_old_ids.size(); ++i) {
    const int old = plan.keep_old_ids[i];
    if (old < 0 || static_cast<std::size_t>(old) >= old_model.size() ||
        old_model.tokens[static_cast<std::size_t>(old)] != plan.model.tokens[i]) {
      throw DataError("prune plan was not built from this tokenizer");
    }
  }
  IntegrityReport report;
  report.merge_closure = has_merge_closure(plan.model);

  struct DocResult {
    bool ok = true;
    std::size_t old_tokens = 0;
    std::size_t new_tokens = 0;
  };
  const auto ranges = chunks(corpus.size(), workers);
  const auto partial = parallel_map(ranges.size(), workers, [&](std::size_t c) {
    Tokenizer old_tok(old_model);
    Tokenizer new_tok(plan.model);
    std::vector<DocResult> out;
    for (std::size_t d = ranges[c].first; d < ranges[c].second; ++d) {
      const std::vector<int> ids = new_tok.encode(corpus[d].text);
      out.push_back({new_tok.decode(ids) == corpus[d].text, old_tok.count_tokens(corpus[d].text),
                     ids.size()});
    }
    return out;
  });
  std::size_t d = 0;
  for (const auto& chunk : partial) {
    for (const DocResult& r : chunk) {
      const Document& doc = corpus[d++];
      ++report.documents;
      if (!r.ok) report.round_trip_failures.push_back(doc.doc_id);
      report.old_tokens += r.old_tokens;
      report.new_tokens += r.new_tokens;
      ScriptStats& s = report.per_script[dominant_script(doc.text)];
      ++s.documents;
      s.old_tokens += r.old_tokens;
      s.new_tokens += r.new_tokens;
    }
  }
  auto ratio = [](std::uint64_t n, std::uint64_t o) {
    return o == 0 ? 1.0 : static_cast<double>(n) / static_cast<double>(o);
  };
  report.inflation = ratio(report.new_tokens, report.old_tokens);
  for (auto& [_, s] : report.per_script) s.inflation = ratio(s.new_tokens, s.old_tokens);
  return report;
}

json IntegrityReport::to_json() const {
  json scripts = json::object();
  for (const auto& [name, s] : per_script) {
    const double docs = s.documents ? static_cast<double>(s.documents) : 1.0;
    scripts[name] = {{"documents", s.documents},
                     {"old_tokens_per_doc", static_cast<double>(s.old_tokens) / docs},
                     {"new_tokens_per_doc", static_cast<double>(s.new_tokens) / docs},
                     {"inflation", s.inflation}};
  }
  return {{"documents", documents},
          {"round_trip_failures", round_trip_failures},
          {"merge_closure", merge_closure},
          {"old_tokens", old_tokens},
          {"new_tokens", new_tokens},
          {"inflation", inflation},
          {"per_script", scripts},
          {"ok", ok()}};
}

std::string emit_embedding_plan(const PrunePlan& plan) {
  std::string out;
  for (int id : plan.keep_old_ids) {
    out += std::to_string(id);
    out += '\n';
  }
  return out;
}

}  // namespace docrl::vocab
