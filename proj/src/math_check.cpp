#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "docrl/error.hpp"
#include "docrl/markup.hpp"

namespace docrl::markup {
namespace {

// Approximates the KaTeX-supported command surface. Structural commands
// (\begin, \end, \left, \right) are handled separately and need no entry.
constexpr std::array kDefaultCommands = {
    // Greek
    "alpha", "beta", "gamma", "delta", "epsilon", "varepsilon", "zeta", "eta", "theta",
    "vartheta", "iota", "kappa", "varkappa", "lambda", "mu", "nu", "xi", "omicron", "pi", "varpi",
    "rho", "varrho", "sigma", "varsigma", "tau", "upsilon", "phi", "varphi", "chi", "psi", "omega",
    "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Upsilon", "Phi", "Psi", "Omega",
    "varGamma", "varDelta", "varTheta", "varLambda", "varXi", "varPi", "varSigma", "varUpsilon",
    "varPhi", "varPsi", "varOmega", "digamma",
    // Letter-like
    "aleph", "beth", "gimel", "daleth", "hbar", "hslash", "ell", "wp", "Re", "Im", "partial",
    "nabla", "infty", "emptyset", "varnothing", "imath", "jmath", "eth", "Bbbk", "complement",
    "mho", "Finv", "Game",
    // Fractions, roots, binomials
    "frac", "dfrac", "tfrac", "cfrac", "sqrt", "binom", "dbinom", "tbinom", "over", "choose",
    "atop", "genfrac",
    // Big operators
    "sum", "prod", "coprod", "int", "iint", "iiint", "oint", "oiint", "oiiint", "intop",
    "smallint", "bigcup", "bigcap", "bigoplus", "bigotimes", "bigodot", "biguplus", "bigsqcup",
    "bigvee", "bigwedge", "lim", "liminf", "limsup", "max", "min", "sup", "inf", "det", "gcd",
    "Pr", "arg", "deg", "dim", "hom", "ker", "exp", "log", "ln", "lg", "sin", "cos", "tan", "cot",
    "sec", "csc", "arcsin", "arccos", "arctan", "sinh", "cosh", "tanh", "coth", "operatorname",
    "limits", "nolimits", "injlim", "projlim", "varliminf", "varlimsup", "varinjlim",
    "varprojlim", "argmax", "argmin",
    // Binary operators and relations
    "pm", "mp", "times", "div", "cdot", "ast", "star", "circ", "bullet", "oplus", "ominus",
    "otimes", "oslash", "odot", "cap", "cup", "uplus", "sqcap", "sqcup", "vee", "wedge", "lor",
    "land", "setminus", "smallsetminus", "wr", "diamond", "bigtriangleup", "bigtriangledown",
    "triangleleft", "triangleright", "lhd", "rhd", "unlhd", "unrhd", "amalg", "dagger", "ddagger",
    "leq", "le", "geq", "ge", "neq", "ne", "equiv", "approx", "approxeq", "sim", "simeq", "cong",
    "propto", "ll", "gg", "lll", "ggg", "subset", "supset", "subseteq", "supseteq", "subsetneq",
    "supsetneq", "sqsubset", "sqsupset", "sqsubseteq", "sqsupseteq", "in", "ni", "notin", "owns",
    "vdash", "dashv", "models", "perp", "parallel", "mid", "nmid", "nparallel", "asymp",
    "bowtie", "doteq", "prec", "succ", "preceq", "succeq", "leqslant", "geqslant", "lesssim",
    "gtrsim", "lessgtr", "gtrless", "nless", "ngtr", "nleq", "ngeq", "ncong", "nsim", "coloneqq",
    "eqqcolon", "triangleq", "trianglelefteq", "trianglerighteq", "not", "neg", "lnot",
    "therefore", "because", "forall", "exists", "nexists", "top", "bot", "angle", "measuredangle",
    "degree", "prime", "backprime", "surd", "flat", "natural", "sharp", "clubsuit",
    "diamondsuit", "heartsuit", "spadesuit", "checkmark", "lozenge", "blacklozenge", "square",
    "blacksquare", "triangle", "triangledown", "blacktriangle", "ltimes", "rtimes", "boxplus",
    "boxminus", "boxtimes", "boxdot", "dotplus", "divideontimes", "leftthreetimes",
    "rightthreetimes", "curlyvee", "curlywedge", "centerdot", "intercal", "smile", "frown",
    "vDash", "Vdash", "Vvdash", "Subset", "Supset", "Cap", "Cup", "lessdot", "gtrdot",
    // Arrows
    "to", "gets", "leftarrow", "rightarrow", "leftrightarrow", "Leftarrow", "Rightarrow",
    "Leftrightarrow", "longleftarrow", "longrightarrow", "longleftrightarrow", "Longleftarrow",
    "Longrightarrow", "Longleftrightarrow", "mapsto", "longmapsto", "hookleftarrow",
    "hookrightarrow", "uparrow", "downarrow", "updownarrow", "Uparrow", "Downarrow",
    "Updownarrow", "nearrow", "searrow", "swarrow", "nwarrow", "iff", "implies", "impliedby",
    "leftharpoonup", "leftharpoondown", "rightharpoonup", "rightharpoondown", "rightleftharpoons",
    "leftrightharpoons", "xrightarrow", "xleftarrow", "xmapsto", "xRightarrow", "xLeftarrow",
    "xleftrightarrow", "xLeftrightarrow", "leadsto", "rightsquigarrow", "circlearrowleft",
    "circlearrowright", "curvearrowleft", "curvearrowright", "twoheadrightarrow",
    "twoheadleftarrow", "rightrightarrows", "leftleftarrows", "upuparrows", "downdownarrows",
    "nrightarrow", "nleftarrow", "nRightarrow", "nLeftarrow", "nleftrightarrow",
    // Delimiters
    "langle", "rangle", "lceil", "rceil", "lfloor", "rfloor", "lvert", "rvert", "lVert", "rVert",
    "vert", "Vert", "lbrace", "rbrace", "lbrack", "rbrack", "backslash", "middle", "big", "Big",
    "bigg", "Bigg", "bigl", "bigr", "Bigl", "Bigr", "biggl", "biggr", "Biggl", "Biggr", "bigm",
    "Bigm", "lgroup", "rgroup", "ulcorner", "urcorner", "llcorner", "lrcorner",
    // Dots and spacing
    "ldots", "cdots", "vdots", "ddots", "dots", "dotsb", "dotsc", "dotsi", "dotsm", "dotso",
    "quad", "qquad", "enspace", "thinspace", "medspace", "thickspace", "negthinspace",
    "negmedspace", "negthickspace", "hspace", "kern", "mkern", "mskip", "hskip", "space", "nobreak",
    "allowbreak", "nobreakspace", "phantom", "hphantom", "vphantom", "smash", "mathstrut", "strut",
    "newline", "cr",
    // Accents
    "hat", "widehat", "check", "widecheck", "tilde", "widetilde", "acute", "grave", "dot", "ddot",
    "dddot", "breve", "bar", "vec", "mathring", "overline", "underline", "overbrace", "underbrace",
    "overrightarrow", "overleftarrow", "overleftrightarrow", "underrightarrow", "underleftarrow",
    "overset", "underset", "stackrel", "utilde", "overgroup", "undergroup", "xcancel", "cancel",
    "bcancel", "sout", "not",
    // Fonts and text
    "mathrm", "mathbf", "mathit", "mathsf", "mathtt", "mathcal", "mathscr", "mathfrak", "mathbb",
    "mathnormal", "boldsymbol", "bm", "bold", "Bbb", "rm", "bf", "it", "sf", "tt", "cal", "frak",
    "text", "textrm", "textbf", "textit", "textsf", "texttt", "textnormal", "textup", "textmd",
    "emph", "mbox", "hbox", "displaystyle", "textstyle", "scriptstyle", "scriptscriptstyle",
    "tiny", "scriptsize", "footnotesize", "small", "normalsize", "large", "Large", "LARGE",
    "huge", "Huge", "color", "textcolor", "colorbox", "fcolorbox", "boxed", "fbox", "pmod", "bmod",
    "pod", "mod", "tag", "notag", "nonumber", "label", "substack", "sideset", "hline", "hdashline",
    "cline", "arraystretch", "rule", "raisebox", "mathop", "mathbin", "mathrel", "mathopen",
    "mathclose", "mathpunct", "mathinner", "mathord", "char", "verb", "ce", "pu", "relax",
    "displaylines", "llap", "rlap", "clap", "mathllap", "mathrlap", "mathclap", "textasciitilde",
    "dag", "ddag", "S", "P", "copyright", "pounds", "yen", "euro", "circledR", "circledS",
    "checkmark", "maltese", "diagup", "diagdown", "varpropto", "blacktriangleleft",
    "blacktriangleright", "bigstar", "sphericalangle", "And", "minuso", "Coloneqq", "coloneq",
    "eqcolon", "vcentcolon", "dotsc", "iddots",
};

constexpr std::array kDefaultEnvironments = {
    "matrix", "pmatrix", "bmatrix", "Bmatrix", "vmatrix", "Vmatrix", "smallmatrix", "array",
    "aligned", "alignedat", "gathered", "cases", "dcases", "rcases", "split", "equation",
    "equation*", "align", "align*", "alignat", "alignat*", "gather", "gather*", "darray",
    "subarray", "CD", "matrix*", "pmatrix*", "bmatrix*", "multline", "multline*", "eqnarray",
    "eqnarray*",
};

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

constexpr std::array kHtmlTags = {"a",    "b",     "big",  "br",   "code", "del",  "div",
                                  "em",   "font",  "hr",   "i",    "img",  "ins",  "li",
                                  "mark", "ol",    "p",    "pre",  "s",    "small", "span",
                                  "strike", "strong", "sub", "sup", "table", "td",  "th",
                                  "tr",   "tt",    "u",    "ul"};

enum class FrameKind { Brace, Env, Left };

struct Frame {
  FrameKind kind;
  std::string name;
  std::size_t offset;
};

}  // namespace

bool ValidationResult::has(std::string_view kind) const {
  for (const MathIssue& i : issues) {
    if (i.kind == kind) return true;
  }
  return false;
}

MathAllowlist MathAllowlist::katex_default() {
  MathAllowlist list;
  for (const char* c : kDefaultCommands) list.commands.insert(c);
  for (const char* e : kDefaultEnvironments) list.environments.insert(e);
  return list;
}

MathAllowlist MathAllowlist::parse(std::string_view text) {
  MathAllowlist list;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string entry = trim(line);
    if (entry.empty()) continue;
    if (entry.rfind("env:", 0) == 0) {
      entry = trim(entry.substr(4));
      if (entry.empty()) continue;
      list.environments.insert(entry);
      continue;
    }
    if (entry.front() == '\\') entry.erase(0, 1);
    if (entry.empty()) continue;
    list.commands.insert(entry);
  }
  return list;
}

MathAllowlist MathAllowlist::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open math allowlist: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void MathAllowlist::merge(const MathAllowlist& other) {
  commands.insert(other.commands.begin(), other.commands.end());
  environments.insert(other.environments.begin(), other.environments.end());
}

bool contains_html_tag(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '<') continue;
    std::size_t j = i + 1;
    if (j < s.size() && s[j] == '/') ++j;
    const std::size_t name_begin = j;
    while (j < s.size() && is_letter(s[j])) ++j;
    if (j == name_begin) continue;
    std::string name(s.substr(name_begin, j - name_begin));
    for (char& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    bool known = false;
    for (const char* tag : kHtmlTags) {
      if (name == tag) {
        known = true;
        break;
      }
    }
    if (!known) continue;
    if (j >= s.size()) continue;
    if (s[j] != '>' && s[j] != '/' && !std::isspace(static_cast<unsigned char>(s[j]))) continue;
    // Attributes may follow; the tag must close before another '<'.
    while (j < s.size() && s[j] != '>' && s[j] != '<') ++j;
    if (j < s.size() && s[j] == '>') return true;
  }
  return false;
}

ValidationResult validate_math(std::string_view span, const MathAllowlist& allowlist) {
  ValidationResult result;
  auto issue = [&](std::string_view kind, std::string detail, std::size_t offset) {
    result.issues.push_back({std::string(kind), std::move(detail), offset});
  };
  auto report_unclosed = [&](const Frame& f) {
    switch (f.kind) {
      case FrameKind::Brace:
        issue(math_issue::kUnbalancedBrace, "unclosed {", f.offset);
        break;
      case FrameKind::Env:
        issue(math_issue::kUnclosedEnv, f.name, f.offset);
        break;
      case FrameKind::Left:
        issue(math_issue::kUnpairedLeft, "\\left without \\right", f.offset);
        break;
    }
  };
  // Reads `{name}` after a \begin/\end, skipping spaces.
  auto read_group = [&](std::size_t& i) -> std::optional<std::string> {
    while (i < span.size() && span[i] == ' ') ++i;
    if (i >= span.size() || span[i] != '{') return std::nullopt;
    const std::size_t close = span.find('}', i + 1);
    if (close == std::string_view::npos) return std::nullopt;
    std::string name(span.substr(i + 1, close - i - 1));
    i = close + 1;
    return name;
  };

  std::vector<Frame> stack;
  std::size_t i = 0;
  while (i < span.size()) {
    const char c = span[i];
    if (c == '%') {
      while (i < span.size() && span[i] != '\n') ++i;
      continue;
    }
    if (c == '{') {
      stack.push_back({FrameKind::Brace, "", i});
      ++i;
      continue;
    }
    if (c == '}') {
      bool has_brace = false;
      for (const Frame& f : stack) has_brace |= f.kind == FrameKind::Brace;
      if (!has_brace) {
        issue(math_issue::kUnbalancedBrace, "unexpected }", i);
      } else {
        while (stack.back().kind != FrameKind::Brace) {
          report_unclosed(stack.back());
          stack.pop_back();
        }
        stack.pop_back();
      }
      ++i;
      continue;
    }
    if (c != '\\') {
      ++i;
      continue;
    }
    const std::size_t at = i;
    ++i;
    if (i >= span.size()) break;
    if (!is_letter(span[i])) {
      ++i;  // control symbol such as \{ \, \\ \;
      continue;
    }
    const std::size_t name_begin = i;
    while (i < span.size() && is_letter(span[i])) ++i;
    const std::string name(span.substr(name_begin, i - name_begin));

    if (name == "begin") {
      auto env = read_group(i);
      if (!env) {
        issue(math_issue::kUnbalancedBrace, "\\begin without {name}", at);
        continue;
      }
      if (!allowlist.environments.contains(*env)) issue(math_issue::kUnknownEnv, *env, at);
      stack.push_back({FrameKind::Env, *env, at});
    } else if (name == "end") {
      auto env = read_group(i);
      if (!env) {
        issue(math_issue::kUnbalancedBrace, "\\end without {name}", at);
        continue;
      }
      bool has_env = false;
      for (const Frame& f : stack) has_env |= f.kind == FrameKind::Env;
      if (!has_env) {
        issue(math_issue::kUnexpectedEnd, *env, at);
        continue;
      }
      while (stack.back().kind != FrameKind::Env) {
        report_unclosed(stack.back());
        stack.pop_back();
      }
      if (stack.back().name != *env) {
        issue(math_issue::kEnvMismatch, "\\begin{" + stack.back().name + "} closed by \\end{" +
                                            *env + "}",
              at);
      }
      stack.pop_back();
    } else if (name == "left") {
      stack.push_back({FrameKind::Left, "", at});
    } else if (name == "right") {
      if (!stack.empty() && stack.back().kind == FrameKind::Left) {
        stack.pop_back();
      } else {
        issue(math_issue::kUnpairedRight, "\\right without \\left", at);
      }
    } else if (!allowlist.commands.contains(name)) {
      issue(math_issue::kUnknownCommand, "\\" + name, at);
    }
  }
  while (!stack.empty()) {
    report_unclosed(stack.back());
    stack.pop_back();
  }
  if (contains_html_tag(span)) issue(math_issue::kHtmlTag, "raw HTML inside math", 0);
  result.valid = result.issues.empty();
  return result;
}

}  // namespace docrl::markup
