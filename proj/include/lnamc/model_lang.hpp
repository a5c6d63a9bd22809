#pragma once

// Text formats for reaction networks and SEL properties.
//
// Model:
//   species l1=98, l2=1, l3=1;
//   N = 1000;
//   l1 + l2 ->{10} 2 l2;
//   a <->{1, 0.5} b;          # two reactions
//    ->{5} x;                 # zero-order birth
//
// Properties (';'-separated, optionally named):
//   rise: P>0.6 [ l2 - (l1 + l3) in [0, inf] ] over [0.5, 1.0];
//   supV<4 [ [1,0,0] ] over [0, 2] && infE>3 [ l1 ] over [1, 1];
//   P=? [ l1 in {[10,20], [30, inf]} ] over [5,5]
//
// Comments run from '#' to end of line. Errors carry a line and column.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lnamc/crn.hpp"
#include "lnamc/error.hpp"
#include "lnamc/sel.hpp"

namespace lnamc {

struct Model {
  Crn crn;
  SystemSetup setup;
};

struct Diagnostic {
  SourceLocation where;
  std::string message;
};

struct PropertySet {
  std::vector<NamedFormula> formulas;
  std::vector<Diagnostic> warnings;
};

namespace lang {

enum class Tok {
  kEnd,
  kIdent,
  kNumber,
  kSemi,
  kComma,
  kEq,
  kPlus,
  kMinus,
  kStar,
  kLParen,
  kRParen,
  kLBracket,
  kRBracket,
  kLBrace,
  kRBrace,
  kArrow,
  kBiArrow,
  kLess,
  kGreater,
  kQuery,
  kAnd,
  kOr,
  kColon,
  kHash,
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double number = 0.0;
  bool integral = false;
  SourceLocation where;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.where = {line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::kIdent;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) t.text += advance();
      } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
                                                                  std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number(t);
      } else {
        lex_punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  static bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '\'';
  }

  char advance() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        // '#' directly before a name is the count sigil (#l1), not a comment.
        if (pos_ + 1 < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '_') &&
            sigil_allowed_)
          return;
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  void lex_number(Token& t) {
    t.kind = Tok::kNumber;
    std::size_t start = pos_;
    bool integral = true;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      integral = false;
      advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t k = pos_ + 1;
      if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
      if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
        integral = false;
        while (pos_ < k) advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      }
    }
    t.text = std::string(src_.substr(start, pos_ - start));
    t.integral = integral;
    t.number = std::strtod(t.text.c_str(), nullptr);
  }

  void lex_punct(Token& t) {
    auto starts = [&](std::string_view s) { return src_.substr(pos_, s.size()) == s; };
    struct P {
      std::string_view s;
      Tok k;
    };
    static constexpr P table[] = {
        {"<->", Tok::kBiArrow}, {"->", Tok::kArrow}, {"=?", Tok::kQuery}, {"&&", Tok::kAnd}, {"||", Tok::kOr},
        {";", Tok::kSemi},      {",", Tok::kComma},  {"=", Tok::kEq},     {"+", Tok::kPlus}, {"-", Tok::kMinus},
        {"*", Tok::kStar},      {"(", Tok::kLParen}, {")", Tok::kRParen}, {"[", Tok::kLBracket},
        {"]", Tok::kRBracket},  {"{", Tok::kLBrace}, {"}", Tok::kRBrace}, {"<", Tok::kLess},
        {">", Tok::kGreater},   {":", Tok::kColon},  {"#", Tok::kHash},
    };
    for (const auto& p : table) {
      if (starts(p.s)) {
        t.kind = p.k;
        for (std::size_t i = 0; i < p.s.size(); ++i) t.text += advance();
        return;
      }
    }
    const auto ch = static_cast<unsigned char>(src_[pos_]);
    std::string shown = std::isprint(ch) ? std::string(1, static_cast<char>(ch)) : "\\x" + to_hex(ch);
    throw ParseError(t.where, "unexpected character '" + shown + "'");
  }

  static std::string to_hex(unsigned char c) {
    const char* digits = "0123456789abcdef";
    return {digits[c >> 4], digits[c & 15]};
  }

 public:
  bool sigil_allowed_ = false;

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Cursor {
 public:
  explicit Cursor(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  bool at(Tok k) const { return peek().kind == k; }
  bool at_word(std::string_view w) const { return at(Tok::kIdent) && peek().text == w; }
  Token next() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool accept(Tok k) {
    if (!at(k)) return false;
    next();
    return true;
  }
  Token expect(Tok k, std::string_view what) {
    if (!at(k)) fail(std::string("expected ") + std::string(what));
    return next();
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const auto& t = peek();
    const std::string found = t.kind == Tok::kEnd ? "end of input" : "'" + t.text + "'";
    throw ParseError(t.where, msg + ", found " + found);
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline std::int64_t to_count(const Token& t, std::string_view what) {
  if (t.kind != Tok::kNumber || !t.integral) throw ParseError(t.where, std::string(what) + " must be a non-negative integer");
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (ec != std::errc{} || ptr != t.text.data() + t.text.size())
    throw ParseError(t.where, std::string(what) + " is out of range");
  return v;
}

// Signed real, or inf / -inf / +inf.
inline double parse_real(Cursor& cur, bool allow_inf) {
  double sign = 1.0;
  if (cur.accept(Tok::kMinus)) sign = -1.0;
  else cur.accept(Tok::kPlus);
  if (allow_inf && cur.at_word("inf")) {
    cur.next();
    return sign * kInf;
  }
  const Token t = cur.expect(Tok::kNumber, "a number");
  if (!std::isfinite(t.number)) throw ParseError(t.where, "number out of range");
  return sign * t.number;
}

}  // namespace lang

// ---------------------------------------------------------------------------
// Models

namespace lang {

struct RawTerm {
  std::int64_t coeff;
  std::string name;
  SourceLocation where;
};

struct RawReaction {
  std::vector<RawTerm> lhs, rhs;
  std::vector<double> rates;  // one (->) or two (<->)
  std::vector<SourceLocation> rate_where;
  SourceLocation where;
};

inline std::vector<RawTerm> parse_side(Cursor& cur) {
  std::vector<RawTerm> terms;
  if (cur.at(Tok::kArrow) || cur.at(Tok::kBiArrow) || cur.at(Tok::kSemi)) return terms;
  for (;;) {
    RawTerm term{1, {}, cur.peek().where};
    if (cur.at(Tok::kNumber)) term.coeff = to_count(cur.next(), "stoichiometric coefficient");
    cur.accept(Tok::kStar);
    const Token name = cur.expect(Tok::kIdent, "a species name");
    term.name = name.text;
    if (term.coeff > 0) terms.push_back(std::move(term));
    if (!cur.accept(Tok::kPlus)) break;
  }
  return terms;
}

}  // namespace lang

inline Model parse_model(std::string_view text) {
  using namespace lang;
  Cursor cur(Lexer(text).tokenize());

  std::vector<std::string> names;
  std::map<std::string, std::size_t> index;
  Counts counts;
  std::optional<double> volume;
  std::vector<RawReaction> raw;

  while (!cur.at(Tok::kEnd)) {
    if (cur.at_word("species") && cur.peek(1).kind == Tok::kIdent) {
      cur.next();
      do {
        const Token name = cur.expect(Tok::kIdent, "a species name");
        if (name.text == "N" || name.text == "species" || name.text == "inf")
          throw ParseError(name.where, "'" + name.text + "' is reserved");
        if (index.count(name.text)) throw ParseError(name.where, "duplicate species '" + name.text + "'");
        cur.expect(Tok::kEq, "'=' after species name");
        const Token n = cur.expect(Tok::kNumber, "an initial count");
        index.emplace(name.text, names.size());
        names.push_back(name.text);
        counts.push_back(to_count(n, "initial count"));
      } while (cur.accept(Tok::kComma));
      cur.expect(Tok::kSemi, "';' after species declaration");
    } else if (cur.at_word("N") && cur.peek(1).kind == Tok::kEq) {
      const Token kw = cur.next();
      cur.next();
      if (volume) throw ParseError(kw.where, "volumetric factor N declared twice");
      const SourceLocation at = cur.peek().where;
      const double v = parse_real(cur, false);
      if (!(v > 0.0)) throw ParseError(at, "volumetric factor N must be positive");
      volume = v;
      cur.expect(Tok::kSemi, "';' after N declaration");
    } else {
      RawReaction r;
      r.where = cur.peek().where;
      r.lhs = parse_side(cur);
      bool reversible = false;
      if (cur.accept(Tok::kBiArrow)) reversible = true;
      else cur.expect(Tok::kArrow, "'->' or '<->'");
      cur.expect(Tok::kLBrace, "'{' before rate constant");
      for (int i = 0; i < (reversible ? 2 : 1); ++i) {
        if (i) cur.expect(Tok::kComma, "',' between forward and reverse rates");
        r.rate_where.push_back(cur.peek().where);
        r.rates.push_back(parse_real(cur, false));
        if (!(r.rates.back() > 0.0)) throw ParseError(r.rate_where.back(), "rate constant must be positive");
      }
      cur.expect(Tok::kRBrace, "'}' after rate constant");
      r.rhs = parse_side(cur);
      cur.expect(Tok::kSemi, "';' after reaction");
      raw.push_back(std::move(r));
    }
  }
  if (names.empty()) throw ParseError(cur.peek().where, "no species declared");
  if (!volume) throw ParseError(cur.peek().where, "volumetric factor N is not declared");

  auto stoich = [&](const std::vector<RawTerm>& side) {
    Stoichiometry s(names.size(), 0);
    for (const auto& t : side) {
      auto it = index.find(t.name);
      if (it == index.end()) throw ParseError(t.where, "undeclared species '" + t.name + "'");
      if (t.coeff > std::numeric_limits<int>::max() - s[it->second])
        throw ParseError(t.where, "stoichiometric coefficient too large");
      s[it->second] += static_cast<int>(t.coeff);
    }
    return s;
  };

  std::vector<Reaction> reactions;
  for (const auto& r : raw) {
    Reaction fwd{stoich(r.lhs), stoich(r.rhs), r.rates[0]};
    bool nonempty = false;
    for (std::size_t i = 0; i < names.size(); ++i) nonempty = nonempty || fwd.reactants[i] || fwd.products[i];
    if (!nonempty) throw ParseError(r.where, "reaction has neither reactants nor products");
    if (r.rates.size() == 2) {
      Reaction rev{fwd.products, fwd.reactants, r.rates[1]};
      reactions.push_back(std::move(fwd));
      reactions.push_back(std::move(rev));
    } else {
      reactions.push_back(std::move(fwd));
    }
  }
  return {Crn(std::move(names), std::move(reactions)), SystemSetup{std::move(counts), *volume}};
}

// Model file text that parse_model maps back to the same network.
inline std::string format_model(const Model& m) {
  const auto& sp = m.crn.species();
  std::string out = "species ";
  for (std::size_t i = 0; i < sp.size(); ++i)
    out += (i ? ", " : "") + sp[i].name + "=" + std::to_string(m.setup.initial_counts[i]);
  out += ";\nN = " + format_shortest(m.setup.volume) + ";\n";
  auto side = [&](const Stoichiometry& s) {
    std::string t;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i]) continue;
      t += (t.empty() ? "" : " + ") + (s[i] == 1 ? "" : std::to_string(s[i]) + " ") + sp[i].name;
    }
    return t;
  };
  for (const auto& r : m.crn.reactions())
    out += side(r.reactants) + " ->{" + format_shortest(r.rate) + "} " + side(r.products) + ";\n";
  return out;
}

// ---------------------------------------------------------------------------
// Properties

namespace lang {

class PropertyParser {
 public:
  PropertyParser(std::string_view text, const Crn& crn) : crn_(crn), cur_(lex(text)) {}

  PropertySet parse() {
    PropertySet out;
    std::size_t unnamed = 0;
    while (!cur_.at(Tok::kEnd)) {
      if (cur_.accept(Tok::kSemi)) continue;
      std::string name;
      if (cur_.at(Tok::kIdent) && cur_.peek(1).kind == Tok::kColon && !is_operator_word(cur_.peek().text)) {
        const Token n = cur_.next();
        cur_.next();
        name = n.text;
        for (const auto& f : out.formulas)
          if (f.name == name) throw ParseError(n.where, "duplicate property name '" + name + "'");
      } else {
        name = "property_" + std::to_string(++unnamed);
      }
      auto f = parse_or();
      out.formulas.push_back({std::move(name), std::move(f)});
      if (!cur_.at(Tok::kEnd)) cur_.expect(Tok::kSemi, "';' between properties");
    }
    out.warnings = std::move(warnings_);
    return out;
  }

 private:
  static std::vector<Token> lex(std::string_view text) {
    Lexer lx(text);
    lx.sigil_allowed_ = true;
    return lx.tokenize();
  }

  static bool is_operator_word(const std::string& w) {
    return w == "P" || w == "supE" || w == "infE" || w == "supV" || w == "infV";
  }

  FormulaPtr parse_or() {
    auto lhs = parse_and();
    while (cur_.accept(Tok::kOr)) lhs = Formula::either(lhs, parse_and());
    return lhs;
  }

  FormulaPtr parse_and() {
    auto lhs = parse_atom();
    while (cur_.accept(Tok::kAnd)) lhs = Formula::both(lhs, parse_atom());
    return lhs;
  }

  FormulaPtr parse_atom() {
    if (cur_.at(Tok::kLParen)) {
      if (++depth_ > kMaxDepth) cur_.fail("formula nested too deeply");
      cur_.next();
      auto f = parse_or();
      cur_.expect(Tok::kRParen, "')'");
      --depth_;
      return f;
    }
    if (!cur_.at(Tok::kIdent) || !is_operator_word(cur_.peek().text))
      cur_.fail("expected an operator (P, supE, infE, supV, infV) or '('");
    const Token op = cur_.next();
    auto [cmp, threshold] = parse_comparison(op.text == "P");
    cur_.expect(Tok::kLBracket, "'[' opening the operand");
    const SourceLocation combo_at = cur_.peek().where;
    Combination b = parse_combination();
    if (op.text == "P") {
      ProbNode node;
      node.cmp = cmp;
      node.threshold = threshold;
      if (!cur_.at_word("in")) cur_.fail("expected 'in' before the target intervals");
      cur_.next();
      const SourceLocation iv_at = cur_.peek().where;
      auto intervals = parse_interval_set();
      try {
        node.target.intervals = IntervalSet(std::move(intervals));
      } catch (const Error& e) {
        throw ParseError(iv_at, e.what());
      }
      if (std::all_of(b.begin(), b.end(), [](auto c) { return c == 0; }) && !node.target.intervals.empty())
        warnings_.push_back({combo_at, "linear combination is identically zero"});
      node.target.b = std::move(b);
      cur_.expect(Tok::kRBracket, "']' closing the operand");
      node.window = parse_window();
      return Formula::prob(std::move(node));
    }
    StatNode node;
    node.kind = op.text == "supE" ? StatKind::kSupE
                : op.text == "infE" ? StatKind::kInfE
                : op.text == "supV" ? StatKind::kSupV
                                    : StatKind::kInfV;
    node.cmp = cmp;
    node.threshold = threshold;
    node.b = std::move(b);
    cur_.expect(Tok::kRBracket, "']' closing the operand");
    node.window = parse_window();
    return Formula::stat(std::move(node));
  }

  std::pair<Comparison, double> parse_comparison(bool probability) {
    if (cur_.accept(Tok::kQuery)) return {Comparison::kQuery, 0.0};
    Comparison c;
    if (cur_.accept(Tok::kLess)) c = Comparison::kLess;
    else if (cur_.accept(Tok::kGreater)) c = Comparison::kGreater;
    else cur_.fail("expected '<', '>' or '=?'");
    const SourceLocation at = cur_.peek().where;
    const double v = parse_real(cur_, false);
    if (probability && !(v >= 0.0 && v <= 1.0)) throw ParseError(at, "probability threshold must lie in [0, 1]");
    return {c, v};
  }

  // Symbolic sum of integer multiples of species, or a raw vector [b1,...].
  Combination parse_combination() {
    if (cur_.at(Tok::kLBracket)) {
      const Token open = cur_.next();
      Combination b;
      do {
        std::int64_t sign = 1;
        if (cur_.accept(Tok::kMinus)) sign = -1;
        else cur_.accept(Tok::kPlus);
        b.push_back(sign * to_count(cur_.expect(Tok::kNumber, "an integer"), "vector entry"));
      } while (cur_.accept(Tok::kComma));
      cur_.expect(Tok::kRBracket, "']' closing the vector");
      if (b.size() != crn_.num_species())
        throw ParseError(open.where, "vector has " + std::to_string(b.size()) + " entries but the model has " +
                                         std::to_string(crn_.num_species()) + " species");
      return b;
    }
    Combination b(crn_.num_species(), 0);
    parse_sum(b, 1);
    return b;
  }

  void parse_sum(Combination& acc, std::int64_t scale) {
    std::int64_t sign = 1;
    if (cur_.accept(Tok::kMinus)) sign = -1;
    else cur_.accept(Tok::kPlus);
    parse_term(acc, scale * sign);
    for (;;) {
      if (cur_.accept(Tok::kPlus)) parse_term(acc, scale);
      else if (cur_.accept(Tok::kMinus)) parse_term(acc, -scale);
      else break;
    }
  }

  void parse_term(Combination& acc, std::int64_t scale) {
    if (cur_.at(Tok::kNumber)) {
      const Token c = cur_.next();
      if (__builtin_mul_overflow(scale, to_count(c, "coefficient"), &scale))
        throw ParseError(c.where, "coefficient too large");
      cur_.accept(Tok::kStar);
    }
    if (cur_.at(Tok::kLParen)) {
      if (++depth_ > kMaxDepth) cur_.fail("expression nested too deeply");
      cur_.next();
      parse_sum(acc, scale);
      cur_.expect(Tok::kRParen, "')'");
      --depth_;
      return;
    }
    cur_.accept(Tok::kHash);
    const Token name = cur_.expect(Tok::kIdent, "a species name");
    const auto idx = crn_.find(name.text);
    if (idx < 0) throw ParseError(name.where, "unknown species '" + name.text + "'");
    if (__builtin_add_overflow(acc[static_cast<std::size_t>(idx)], scale, &acc[static_cast<std::size_t>(idx)]))
      throw ParseError(name.where, "coefficient too large");
  }

  Interval parse_interval() {
    const Token open = cur_.expect(Tok::kLBracket, "'[' opening an interval");
    Interval iv;
    iv.lower = parse_real(cur_, true);
    cur_.expect(Tok::kComma, "',' inside interval");
    iv.upper = parse_real(cur_, true);
    cur_.expect(Tok::kRBracket, "']' closing an interval");
    if (iv.lower > iv.upper) throw ParseError(open.where, "interval lower bound exceeds upper bound");
    return iv;
  }

  std::vector<Interval> parse_interval_set() {
    std::vector<Interval> out;
    Tok close = Tok::kEnd;
    if (cur_.accept(Tok::kLBrace)) close = Tok::kRBrace;
    else if (cur_.accept(Tok::kLParen)) close = Tok::kRParen;
    if (close == Tok::kEnd) {
      out.push_back(parse_interval());
      return out;
    }
    if (!cur_.at(close)) {
      do out.push_back(parse_interval());
      while (cur_.accept(Tok::kComma));
    }
    cur_.expect(close, close == Tok::kRBrace ? "'}'" : "')'");
    return out;
  }

  TimeWindow parse_window() {
    if (!cur_.at_word("over")) cur_.fail("expected 'over [t1, t2]'");
    cur_.next();
    const Token open = cur_.expect(Tok::kLBracket, "'[' opening the time window");
    TimeWindow w;
    w.begin = parse_real(cur_, false);
    cur_.expect(Tok::kComma, "',' inside time window");
    w.end = parse_real(cur_, false);
    cur_.expect(Tok::kRBracket, "']' closing the time window");
    if (w.begin > w.end) throw ParseError(open.where, "time window has t1 > t2");
    if (w.begin < 0.0) throw ParseError(open.where, "time window starts before 0");
    return w;
  }

  static constexpr int kMaxDepth = 200;

  const Crn& crn_;
  Cursor cur_;
  std::vector<Diagnostic> warnings_;
  int depth_ = 0;
};

}  // namespace lang

inline PropertySet parse_property(std::string_view text, const Crn& crn) {
  return lang::PropertyParser(text, crn).parse();
}

inline std::vector<std::string> species_names(const Crn& crn) {
  std::vector<std::string> names;
  for (const auto& s : crn.species()) names.push_back(s.name);
  return names;
}

}  // namespace lnamc
