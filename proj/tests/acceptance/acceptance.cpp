// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Usage: acceptance <golden-dir>

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "docrl/bbox_eval.hpp"
#include "docrl/merge.hpp"
#include "docrl/normalize.hpp"
#include "docrl/rewards.hpp"
#include "docrl/vocab_prune.hpp"

using namespace docrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Grid boxes: corners on {0, 250, 500, 750, 1000}.

constexpr std::array<int, 5> kGrid = {0, 250, 500, 750, 1000};

std::vector<BBox> grid_boxes(bool include_degenerate) {
  std::vector<BBox> out;
  for (int x1 = 0; x1 < 5; ++x1)
    for (int x2 = x1; x2 < 5; ++x2)
      for (int y1 = 0; y1 < 5; ++y1)
        for (int y2 = y1; y2 < 5; ++y2) {
          if (!include_degenerate && (x1 == x2 || y1 == y2)) continue;
          out.push_back({kGrid[x1], kGrid[y1], kGrid[x2], kGrid[y2]});
        }
  return out;
}

/// IoU by counting the 250x250 grid cells each box covers.
double cell_iou(const BBox& a, const BBox& b) {
  int inter = 0;
  int uni = 0;
  for (int cx = 0; cx < 4; ++cx) {
    for (int cy = 0; cy < 4; ++cy) {
      const int x = kGrid[cx];
      const int y = kGrid[cy];
      const bool in_a = a.x1 <= x && x + 250 <= a.x2 && a.y1 <= y && y + 250 <= a.y2;
      const bool in_b = b.x1 <= x && x + 250 <= b.x2 && b.y1 <= y && y + 250 <= b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

using IdBoxes = std::vector<std::pair<int, BBox>>;

double oracle_bbox_reward(const IdBoxes& gt, const IdBoxes& pred) {
  if (gt.empty() && pred.empty()) return 1.0;
  double sum = 0.0;
  int shared = 0;
  for (const auto& [gid, gbox] : gt) {
    for (const auto& [pid, pbox] : pred) {
      if (gid != pid) continue;
      sum += cell_iou(gbox, pbox);
      ++shared;
    }
  }
  if (shared == 0) return 0.0;
  return (sum / shared) * shared / static_cast<double>(std::max(gt.size(), pred.size()));
}

rewards::BoxMap to_map(const IdBoxes& entries) {
  rewards::BoxMap m;
  for (const auto& [id, b] : entries) m.insert(id, b);
  return m;
}

Outcome check_bbox_reward_oracle() {
  const auto start = Clock::now();
  const std::vector<BBox> boxes = grid_boxes(true);
  std::size_t cases = 0;
  double max_err = 0.0;

  auto check = [&](const IdBoxes& gt, const IdBoxes& pred) {
    const double got = rewards::bbox_reward(to_map(gt), to_map(pred));
    max_err = std::max(max_err, std::fabs(got - oracle_bbox_reward(gt, pred)));
    ++cases;
  };

  // Every single-ID pair of boxes.
  for (const BBox& g : boxes)
    for (const BBox& p : boxes) check({{1, g}}, {{1, p}});

  // Every pair of ID subsets of {1,2,3}, with seeded box draws.
  std::mt19937 rng(20240601);
  for (int gmask = 0; gmask < 8; ++gmask) {
    for (int pmask = 0; pmask < 8; ++pmask) {
      for (int draw = 0; draw < 200; ++draw) {
        IdBoxes gt;
        IdBoxes pred;
        for (int id = 1; id <= 3; ++id) {
          if (gmask & (1 << (id - 1))) gt.push_back({id, boxes[rng() % boxes.size()]});
          if (pmask & (1 << (id - 1))) pred.push_back({id, boxes[rng() % boxes.size()]});
        }
        check(gt, pred);
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {max_err <= 1e-12 && elapsed < 10.0,
          std::to_string(cases) + " cases, max |error| " + fmt(max_err) + " (tol 1e-12), " +
              fmt(elapsed) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------------------

/// Largest number of one-to-one pairs with IoU >= 0.5, by exhaustive search.
std::size_t brute_force_tp(const std::vector<BBox>& gt, const std::vector<BBox>& pred) {
  std::vector<bool> used(pred.size(), false);
  std::function<std::size_t(std::size_t)> best = [&](std::size_t g) -> std::size_t {
    if (g == gt.size()) return 0;
    std::size_t result = best(g + 1);
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (used[p] || cell_iou(gt[g], pred[p]) < 0.5) continue;
      used[p] = true;
      result = std::max(result, 1 + best(g + 1));
      used[p] = false;
    }
    return result;
  };
  return best(0);
}

Outcome check_matcher_oracle() {
  const auto start = Clock::now();
  const std::vector<BBox> boxes = grid_boxes(true);
  std::size_t cases = 0;
  std::size_t shipped_divergences = 0;
  std::size_t greedy_divergences = 0;
  std::vector<std::string> greedy_examples;

  auto check = [&](const std::vector<BBox>& gt, const std::vector<BBox>& pred) {
    const std::size_t want = brute_force_tp(gt, pred);
    const std::size_t got = bbox_eval::match_boxes(gt, pred).size();
    const std::size_t greedy =
        bbox_eval::match_boxes(gt, pred, 0.5, bbox_eval::Matcher::Greedy).size();
    if (got != want) ++shipped_divergences;
    if (greedy != want) {
      if (greedy_examples.size() < 3) {
        std::string ex = "gt=";
        for (const BBox& b : gt) ex += "[" + b.to_string() + "]";
        ex += " pred=";
        for (const BBox& b : pred) ex += "[" + b.to_string() + "]";
        greedy_examples.push_back(ex);
      }
      ++greedy_divergences;
    }
    ++cases;
  };

  for (const BBox& g : boxes)
    for (const BBox& p : boxes) check({g}, {p});
  std::mt19937 rng(7);
  for (std::size_t ng = 0; ng <= 3; ++ng) {
    for (std::size_t np = 0; np <= 3; ++np) {
      if (ng <= 1 && np <= 1) continue;
      for (int draw = 0; draw < 20000; ++draw) {
        std::vector<BBox> gt(ng);
        std::vector<BBox> pred(np);
        for (BBox& b : gt) b = boxes[rng() % boxes.size()];
        for (BBox& b : pred) b = boxes[rng() % boxes.size()];
        check(gt, pred);
      }
    }
  }
  const double elapsed = seconds_since(start);
  std::cout << "  info: greedy matcher differs from the optimum in " << greedy_divergences
            << " of " << cases << " cases" << std::endl;
  for (const std::string& ex : greedy_examples) std::cout << "    e.g. " << ex << std::endl;
  return {shipped_divergences == 0 && elapsed < 30.0,
          std::to_string(cases) + " cases, default matcher divergences " +
              std::to_string(shipped_divergences) + ", " + fmt(elapsed) + " s (limit 30 s)"};
}

// ---------------------------------------------------------------------------

Outcome check_self_evaluation() {
  std::mt19937 rng(855);
  std::vector<bbox_eval::PageBoxes> gt;
  auto make_pages = [&](const std::string& subset, int count) {
    for (int i = 0; i < count; ++i) {
      bbox_eval::PageBoxes page{subset + "_" + std::to_string(i), subset, {}};
      const int n = static_cast<int>(rng() % 6);
      for (int k = 0; k < n; ++k) {
        const int x1 = static_cast<int>(rng() % 990);
        const int y1 = static_cast<int>(rng() % 990);
        const int x2 = x1 + 1 + static_cast<int>(rng() % (1000 - x1));
        const int y2 = y1 + 1 + static_cast<int>(rng() % (1000 - y1));
        page.boxes.push_back({x1, y1, std::min(x2, 1000), std::min(y2, 1000)});
      }
      gt.push_back(std::move(page));
    }
  };
  make_pages("arxiv", 290);
  make_pages("old_scans", 565);
  const auto result = bbox_eval::evaluate_corpus(gt, gt);
  bool ok = result.size() == 2;
  std::string detail;
  for (const auto& [subset, r] : result) {
    ok = ok && r.f1_at_05 == 1.0 && r.mean_iou == 1.0 && r.count_accuracy == 100.0;
    detail += subset + " (" + std::to_string(r.pages) + " pages): F1 " + fmt(r.f1_at_05, 17) +
              ", mean IoU " + fmt(r.mean_iou, 17) + ", count accuracy " +
              fmt(r.count_accuracy, 17) + "%; ";
  }
  return {ok, detail + "exact equality required"};
}

// ---------------------------------------------------------------------------

/// Distance in units in the last place between two encodings of a float.
std::uint64_t ulp_distance(const std::uint8_t* a, const std::uint8_t* b, std::size_t width) {
  auto ordered = [width](const std::uint8_t* p) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, p, width);
    const std::uint64_t sign = std::uint64_t{1} << (8 * width - 1);
    const auto magnitude = static_cast<std::int64_t>(bits & ~sign);
    return (bits & sign) ? -magnitude : magnitude;
  };
  const std::int64_t x = ordered(a);
  const std::int64_t y = ordered(b);
  return static_cast<std::uint64_t>(x > y ? x - y : y - x);
}

std::uint64_t max_ulps(const merge::TensorArchive& a, const merge::TensorArchive& b) {
  std::uint64_t worst = 0;
  for (const auto& [name, ta] : a.tensors) {
    const merge::Tensor& tb = b.tensors.at(name);
    if (ta.dtype != tb.dtype || ta.shape != tb.shape) return UINT64_MAX;
    if (!merge::is_float(ta.dtype)) {
      if (ta.data != tb.data) return UINT64_MAX;
      continue;
    }
    const std::size_t w = merge::dtype_size(ta.dtype);
    for (std::size_t i = 0; i < ta.numel(); ++i) {
      worst = std::max(worst, ulp_distance(ta.data.data() + i * w, tb.data.data() + i * w, w));
    }
  }
  return worst;
}

merge::TensorArchive random_archive(std::mt19937_64& rng, std::size_t count, double noise,
                                    const merge::TensorArchive* like) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const merge::DType dtypes[] = {merge::DType::F32, merge::DType::F16, merge::DType::BF16,
                                 merge::DType::F64, merge::DType::I32};
  merge::TensorArchive out;
  out.metadata["format"] = "pt";
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = "model.layers." + std::to_string(i) + ".weight";
    const merge::DType d = dtypes[i % 5];
    const std::vector<std::int64_t> shape = {static_cast<std::int64_t>(4 + i % 13), 16};
    const std::size_t n = static_cast<std::size_t>(shape[0] * shape[1]);
    if (!merge::is_float(d)) {
      out.tensors[name] = like ? like->tensors.at(name)
                               : merge::Tensor{d, shape, std::vector<std::uint8_t>(n * 4, 3)};
      continue;
    }
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = like ? like->tensors.at(name).get(k) + noise * normal(rng) : normal(rng);
    }
    out.tensors[name] = merge::Tensor::from_doubles(d, shape, v);
  }
  return out;
}

Outcome check_merge_exactness() {
  const auto start = Clock::now();
  std::mt19937_64 rng(31337);
  const merge::TensorArchive base = random_archive(rng, 120, 0.0, nullptr);
  const merge::TensorArchive other = random_archive(rng, 120, 0.05, &base);
  const merge::TensorArchive third = random_archive(rng, 120, 0.05, &base);

  const bool alpha0 = merge::task_arithmetic({&base, &other, 0.0}) == base;
  const std::uint64_t alpha1 = max_ulps(merge::task_arithmetic({&base, &other, 1.0}), other);
  const std::uint64_t identical = max_ulps(merge::soup({base, base, base, base}), base);
  const merge::TensorArchive s1 = merge::soup({base, other, third});
  const bool permutation = merge::soup({third, base, other}) == s1 &&
                           merge::soup({other, third, base}) == s1 &&
                           merge::soup({third, other, base}) == s1;
  const double elapsed = seconds_since(start);
  const bool ok = alpha0 && alpha1 <= 1 && identical <= 1 && permutation && elapsed < 5.0;
  return {ok, "120 tensors (F32/F16/BF16/F64/I32); alpha=0 bit-identical " +
                  std::string(alpha0 ? "yes" : "no") + ", alpha=1 max " +
                  std::to_string(alpha1) + " ulp, soup of 4 identical max " +
                  std::to_string(identical) + " ulp, permutation-invariant " +
                  (permutation ? "yes" : "no") + ", " + fmt(elapsed) + " s (limit 5 s)"};
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& english_words() {
  static const std::vector<std::string> words = [] {
    std::istringstream in(
        "the of and to in is was for that with as on by at from his her an which are this "
        "be or had it not but were their have one all they has been its more other new some "
        "time would there first into after these two also who when can may most over only "
        "such about any many where between both through during each well under since those "
        "while several including against early later however known around family became "
        "number system people water history world report model result table figure section "
        "method value page document image text reading order layout column header footer "
        "measured observed proposed compared increased reduced significant analysis sample "
        "region country village river mountain market council school church station company "
        "science language music league season government population building character "
        "production university development research training evaluation experiment");
    std::vector<std::string> w;
    for (std::string s; in >> s;) w.push_back(s);
    return w;
  }();
  return words;
}

std::string pseudo_word(std::mt19937& rng) {
  static const char* syll[] = {"ka", "lo", "mi", "ster", "ran", "vel", "tor", "qui", "bra",
                               "den", "sol", "ph", "ine", "ous", "ment", "ar", "ex", "pli"};
  std::string w;
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) w += syll[rng() % 18];
  return w;
}

std::string prose(std::mt19937& rng, std::size_t min_bytes) {
  const auto& words = english_words();
  std::string text;
  while (text.size() < min_bytes) {
    const int len = 6 + static_cast<int>(rng() % 18);
    std::string sentence;
    for (int i = 0; i < len; ++i) {
      std::string w = rng() % 5 == 0 ? pseudo_word(rng) : words[rng() % words.size()];
      if (rng() % 23 == 0) w = std::to_string(rng() % 2000);
      if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      sentence += (i ? " " : "") + w;
      if (i + 1 < len && rng() % 9 == 0) sentence += ",";
    }
    text += sentence + (rng() % 4 == 0 ? ".\n\n" : ". ");
  }
  return text;
}

Outcome check_loop_detector() {
  std::mt19937 rng(1013);
  std::size_t loops_flagged = 0;
  std::size_t prose_flagged = 0;
  double worst_loop = 0.0;
  double best_prose = 1.0;
  for (int i = 0; i < 50; ++i) {
    // Short lead-in followed by an n-gram repeated past 1 KB.
    const std::string lead = prose(rng, rng() % 120);
    std::string gram;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) gram += english_words()[rng() % english_words().size()] + " ";
    if (rng() % 3 == 0) gram += "\n";
    std::string text = lead;
    const std::size_t target = 1024 + rng() % 3072;
    while (text.size() < target) text += gram;
    const auto r = normalize::detect_loops(text, 0.13);
    loops_flagged += r.flagged;
    worst_loop = std::max(worst_loop, r.compression_ratio);
  }
  for (int i = 0; i < 50; ++i) {
    const auto r = normalize::detect_loops(prose(rng, 300 + rng() % 3700), 0.13);
    prose_flagged += r.flagged;
    best_prose = std::min(best_prose, r.compression_ratio);
  }
  const bool ok = loops_flagged >= 48 && prose_flagged <= 2;
  return {ok, "threshold 0.13: degenerate flagged " + std::to_string(loops_flagged) +
                  "/50 (need >= 95%), natural flagged " + std::to_string(prose_flagged) +
                  "/50 (need <= 5%); highest degenerate ratio " + fmt(worst_loop) +
                  ", lowest natural ratio " + fmt(best_prose)};
}

// ---------------------------------------------------------------------------

std::string fuzz_document(std::mt19937& rng) {
  static const std::vector<std::string> pieces = {
      "# Heading", "## Sub heading  ", "\\section{Introduction}", "\\subsection*{Setup}",
      "Plain sentence with trailing space.   ", "Tabs\there\t", "Inline $x^2 + y$ math.",
      "$$\\frac{a}{b}$$", "| a | b |\n|---|---|\n| 1 | 2 |", "![image](image_2.png)10,10,300,400",
      "See \\ref{fig:one} and \\cite{key}.", "Line with CRLF\r\n", "", "   ", "\n\n\n",
      "\\textbf{bold} words", "unicode: café 中文 ✓", "```python\nprint(1)\n```",
      "<table><tr><td>x</td></tr></table>", "\\begin{itemize}\\item one\\end{itemize}",
      "*emphasis* and **strong**", "Footnote 3", "$\\unknowncmd{z}$"};
  std::string doc;
  if (rng() % 4 == 0) doc += rng() % 2 ? "```markdown\n" : "```\n";
  const int n = static_cast<int>(rng() % 12);
  for (int i = 0; i < n; ++i) {
    doc += pieces[rng() % pieces.size()];
    doc += rng() % 3 == 0 ? "\r\n" : "\n";
    if (rng() % 5 == 0) doc += "\n\n";
  }
  if (doc.rfind("```", 0) == 0 && rng() % 3) doc += "```\n";
  return doc;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome check_normalization(const fs::path& golden_dir) {
  std::mt19937 rng(200);
  const auto allowlist = markup::MathAllowlist::katex_default();
  std::size_t sanitize_bad = 0;
  std::size_t convert_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const std::string doc = fuzz_document(rng);
    const std::string once = normalize::sanitize(doc).text;
    sanitize_bad += normalize::sanitize(once).text != once;
    const std::string conv = normalize::convert_and_validate(doc, allowlist).text;
    convert_bad += normalize::convert_and_validate(conv, allowlist).text != conv;
  }

  std::size_t goldens = 0;
  std::vector<std::string> golden_failures;
  const normalize::PipelineConfig config;
  if (fs::is_directory(golden_dir)) {
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(golden_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > 6 && name.ends_with(".in.md")) inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
    for (const fs::path& in : inputs) {
      const std::string stem = in.filename().string().substr(0, in.filename().string().size() - 6);
      const std::string expected = read_text(golden_dir / (stem + ".expected.md"));
      const std::string got = normalize::normalize_document(read_text(in), config).text;
      ++goldens;
      if (got != expected) golden_failures.push_back(stem);
    }
  }
  std::string detail = "200 fuzz docs: sanitize non-fixpoints " + std::to_string(sanitize_bad) +
                       ", convert non-fixpoints " + std::to_string(convert_bad) + "; goldens " +
                       std::to_string(goldens - golden_failures.size()) + "/" +
                       std::to_string(goldens) + " match";
  for (const std::string& f : golden_failures) detail += " [mismatch: " + f + "]";
  return {sanitize_bad == 0 && convert_bad == 0 && goldens >= 3 && golden_failures.empty(),
          detail};
}

// ---------------------------------------------------------------------------

std::string encode_utf8(char32_t c) {
  std::string s;
  if (c < 0x80) {
    s += static_cast<char>(c);
  } else if (c < 0x800) {
    s += static_cast<char>(0xC0 | (c >> 6));
    s += static_cast<char>(0x80 | (c & 0x3F));
  } else if (c < 0x10000) {
    s += static_cast<char>(0xE0 | (c >> 12));
    s += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (c & 0x3F));
  } else {
    s += static_cast<char>(0xF0 | (c >> 18));
    s += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
    s += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (c & 0x3F));
  }
  return s;
}

std::string cjk_text(std::mt19937& rng, std::size_t chars, std::size_t alphabet) {
  std::string s;
  for (std::size_t i = 0; i < chars; ++i) {
    s += encode_utf8(static_cast<char32_t>(0x4E00 + rng() % alphabet));
    if (rng() % 20 == 0) s += encode_utf8(0x3002);
  }
  return s;
}

std::string fuzz_utf8(std::mt19937& rng) {
  std::string s;
  const std::size_t len = rng() % 48;
  for (std::size_t i = 0; i < len; ++i) {
    char32_t c = 0;
    switch (rng() % 6) {
      case 0: c = 0x20 + rng() % 0x5F; break;
      case 1: c = 0xA0 + rng() % 0x160; break;             // Latin-1 and Extended-A
      case 2: c = 0x4E00 + rng() % 0x5000; break;          // CJK ideographs
      case 3: c = 0x1F300 + rng() % 0x300; break;          // emoji
      case 4: c = "\n\t '"[rng() % 4]; break;
      default: c = 0x80 + rng() % 0xD780; break;           // below the surrogate range
    }
    s += encode_utf8(c);
  }
  return s;
}

Outcome check_tokenizer_integrity() {
  const auto start = Clock::now();
  std::mt19937 rng(16384);
  static const char* fr_words[] = {"le", "la", "les", "des", "une", "est", "dans", "pour", "avec",
                                   "sur", "que", "qui", "pas", "plus", "été", "être", "où",
                                   "français", "première", "très", "déjà", "après", "à", "ça"};
  static const char* syll[] = {"an", "en", "on", "ré", "té", "tion", "ment", "eur", "ais",
                               "ing", "er", "th", "str", "qu", "ch", "ou", "ai", "è",
                               "pr", "bl", "ive", "ness", "ité", "ique"};
  // A large pool of pseudo-words gives the trainer enough distinct merges.
  std::vector<std::string> lexicon;
  for (int i = 0; i < 30000; ++i) {
    std::string w;
    const int n = 2 + static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) w += syll[rng() % 24];
    lexicon.push_back(w);
  }
  for (const char* w : fr_words) lexicon.push_back(w);
  for (const std::string& w : english_words()) lexicon.push_back(w);

  std::vector<vocab::Document> latin;
  for (int d = 0; d < 3000; ++d) {
    std::string text;
    for (int i = 0; i < 120; ++i) {
      // Roughly Zipfian: squaring a uniform draw favours the head of the pool.
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const std::string& w = lexicon[static_cast<std::size_t>(u * u * u * lexicon.size())];
      text += (i ? " " : "") + w;
      if (rng() % 12 == 0) text += rng() % 2 ? "," : ".";
    }
    latin.push_back({"latin_" + std::to_string(d), text});
  }
  std::vector<vocab::Document> cjk;
  for (int d = 0; d < 300; ++d) cjk.push_back({"cjk_" + std::to_string(d), cjk_text(rng, 200, 3000)});

  std::vector<vocab::Document> training = latin;
  training.insert(training.end(), cjk.begin(), cjk.end());
  const vocab::BpeModel model = vocab::train_bpe(training, 20000, {"<s>", "</s>"});
  const double train_s = seconds_since(start);

  const vocab::FreqTable freq =
      vocab::propagate_frequencies(vocab::count_frequencies(latin, model, 4), model);
  std::size_t latin_tokens = 0;
  const std::vector<int> bytes = model.byte_ids();
  for (std::size_t id = 0; id < model.size(); ++id) {
    if (freq[id] > 0 && std::find(bytes.begin(), bytes.end(), static_cast<int>(id)) == bytes.end())
      ++latin_tokens;
  }
  const vocab::PrunePlan plan = vocab::prune(model, freq, vocab::kTarget16k);

  std::vector<vocab::Document> fuzz;
  for (int i = 0; i < 10000; ++i) fuzz.push_back({"fuzz_" + std::to_string(i), fuzz_utf8(rng)});
  const vocab::IntegrityReport fuzz_report = vocab::verify_integrity(model, plan, fuzz, 4);
  const vocab::IntegrityReport latin_report = vocab::verify_integrity(model, plan, latin, 4);
  std::vector<vocab::Document> cjk_sample;
  for (int d = 0; d < 100; ++d) cjk_sample.push_back({"sample_" + std::to_string(d), cjk_text(rng, 150, 3000)});
  const vocab::IntegrityReport cjk_report = vocab::verify_integrity(model, plan, cjk_sample, 4);

  const bool ok = plan.model.size() == vocab::kTarget16k && fuzz_report.round_trip_failures.empty() &&
                  vocab::has_merge_closure(plan.model) && latin_report.inflation >= 1.0 &&
                  cjk_report.inflation > 1.0;
  return {ok, "model " + std::to_string(model.size()) + " tokens (" + std::to_string(latin_tokens) +
                  " multi-byte tokens seen in EN/FR) pruned to " +
                  std::to_string(plan.model.size()) + "; fuzz round-trip failures " +
                  std::to_string(fuzz_report.round_trip_failures.size()) + "/10000; merge closure " +
                  (vocab::has_merge_closure(plan.model) ? "yes" : "no") + "; inflation EN/FR " +
                  fmt(latin_report.inflation, 6) + " (need >= 1), CJK " +
                  fmt(cjk_report.inflation, 6) + " (need > 1); train " + fmt(train_s) + " s, total " +
                  fmt(seconds_since(start)) + " s"};
}

// ---------------------------------------------------------------------------

std::string fuzz_page(std::mt19937& rng) {
  static const std::vector<std::string> math = {
      "x^2",        "\\frac{a}{b}", "\\alpha + \\beta", "\\mycmd{x}", "\\left( x \\right)",
      "\\left( x",  "{a",           "\\begin{matrix} a \\end{matrix}", "\\begin{myenv} a \\end{myenv}",
      "\\foo\\bar", "\\sqrt{2}",    "<b>x</b>"};
  std::string s;
  const int n = static_cast<int>(rng() % 14);
  for (int i = 0; i < n; ++i) {
    switch (rng() % 9) {
      case 0: s += "$" + math[rng() % math.size()] + "$ "; break;
      case 1: s += "$$" + math[rng() % math.size()] + "$$\n"; break;
      case 2: {
        s += "![image](image_" + std::to_string(rng() % 5) + ".png)";
        if (rng() % 4) {
          const int x1 = static_cast<int>(rng() % 1001);
          const int y1 = static_cast<int>(rng() % 1001);
          s += std::to_string(x1) + "," + std::to_string(y1) + "," +
               std::to_string(x1 + static_cast<int>(rng() % (1001 - x1))) + "," +
               std::to_string(rng() % 1100);
        }
        s += "\n";
        break;
      }
      case 3: s += "*emph* "; break;
      case 4: s += "<table><tr><td>1</td></tr>"; break;
      case 5: {
        const std::string gram = "loop " + std::to_string(rng() % 9) + " ";
        for (int k = 0; k < 80; ++k) s += gram;
        break;
      }
      case 6: s += "# Title\n"; break;
      case 7: s += "$"; break;
      default: s += english_words()[rng() % english_words().size()] + " "; break;
    }
  }
  return s;
}

Outcome check_reward_bounds() {
  const auto start = Clock::now();
  std::mt19937 rng(100000);
  rewards::ScoringConfig config;
  config.score_bbox = true;
  markup::MathAllowlist bigger = config.allowlist;
  bigger.merge(markup::MathAllowlist::parse("\\mycmd\nfoo\nbar\nenv:myenv\n"));

  std::size_t out_of_range = 0;
  std::size_t hallucination_gains = 0;
  std::size_t allowlist_losses = 0;
  for (int i = 0; i < 100000; ++i) {
    const markup::PageOutput page = markup::parse_page(fuzz_page(rng), rng() % 8 != 0);
    const rewards::BoxMap gt = rewards::box_map_from_page(markup::parse_page(fuzz_page(rng)));
    std::vector<rewards::TestCase> tests;
    if (rng() % 2) tests.push_back(rewards::Present{"loop", rng() % 2});
    if (rng() % 2) tests.push_back(rewards::Absent{"Title"});
    if (rng() % 3 == 0) tests.push_back(rewards::Order{"the", "of"});
    if (rng() % 3 == 0) tests.push_back(rewards::MathRenders{});
    const rewards::RewardBreakdown r = rewards::score_rollout(page, tests, gt, config);
    auto bad = [](const std::optional<double>& v) { return v && !(*v >= 0.0 && *v <= 1.0); };
    out_of_range += bad(r.unit_test_score) || bad(r.repetition_score) || bad(r.math_score) ||
                    bad(r.formatting_score) || bad(r.bbox_score) ||
                    !(r.aggregate >= 0.0 && r.aggregate <= 1.0);

    rewards::BoxMap pred = rewards::box_map_from_page(page);
    const double before = rewards::bbox_reward(gt, pred);
    int fresh = 1;
    while (gt.boxes.count(fresh) || pred.boxes.count(fresh)) ++fresh;
    const int x1 = static_cast<int>(rng() % 900);
    const int y1 = static_cast<int>(rng() % 900);
    pred.insert(fresh, BBox{x1, y1, x1 + 50, y1 + 50});
    hallucination_gains += rewards::bbox_reward(gt, pred) > before;

    const auto narrow = rewards::math_reward(page, config.allowlist);
    const auto wide = rewards::math_reward(page, bigger);
    allowlist_losses += narrow.has_value() != wide.has_value() || (narrow && *wide < *narrow);
  }
  const double elapsed = seconds_since(start);
  return {out_of_range == 0 && hallucination_gains == 0 && allowlist_losses == 0,
          "100000 fuzzed pages: components outside [0,1] " + std::to_string(out_of_range) +
              ", hallucinated box raised bbox reward " + std::to_string(hallucination_gains) +
              ", larger allowlist lowered math reward " + std::to_string(allowlist_losses) +
              ", " + fmt(elapsed) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path golden_dir = argc > 1 ? fs::path(argv[1]) : fs::path("tests/golden");
  report("bbox_reward_oracle", check_bbox_reward_oracle());
  report("matcher_oracle", check_matcher_oracle());
  report("self_evaluation", check_self_evaluation());
  report("merge_exactness", check_merge_exactness());
  report("loop_detector", check_loop_detector());
  report("normalization_fixpoints_and_goldens", check_normalization(golden_dir));
  report("tokenizer_integrity", check_tokenizer_integrity());
  report("reward_bounds_and_monotonicity", check_reward_bounds());
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
