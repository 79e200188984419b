#pragma once

// Restricted natural-language syntax for PILOT policies, e.g.
//
//   Parket may collect data of type number_plate if car_location is Lyon
//   and use it for commercial_offers purposes until 21/03/2019.
//   This data may be transferred to ParketWW which may use it for
//   commercial_offers purposes until 26/04/2019.
//
// Keywords are case-insensitive, labels are case-sensitive.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pilot/condition.hpp"
#include "pilot/error.hpp"
#include "pilot/hierarchy.hpp"
#include "pilot/policy.hpp"
#include "pilot/timestamp.hpp"

namespace pilot {

namespace text {

enum class TokenKind { kIdent, kInt, kDate, kString, kOp, kLParen, kRParen, kComma, kPeriod, kEnd };

struct Token {
  TokenKind kind;
  std::string text;  // decoded contents for strings, lexeme otherwise
  std::size_t offset;
  std::size_t length;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline SourceSpan span_at(std::string_view src, std::size_t offset, std::size_t length) {
  SourceSpan s{offset, length, 1, 1};
  for (std::size_t i = 0; i < offset && i < src.size(); ++i) {
    if (src[i] == '\n') {
      ++s.line;
      s.column = 1;
    } else {
      ++s.column;
    }
  }
  return s;
}

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg, std::size_t at, std::size_t len) {
    throw SyntaxError(msg, span_at(src, at, len));
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (ident_start(c)) {
      while (i < src.size() && ident_char(src[i])) ++i;
      out.push_back({TokenKind::kIdent, std::string(src.substr(start, i - start)), start, i - start});
    } else if (digit(c) || (c == '-' && i + 1 < src.size() && digit(src[i + 1]))) {
      ++i;
      while (i < src.size() && digit(src[i])) ++i;
      bool date = false;
      if (c != '-' && i < src.size() && src[i] == '/') {
        date = true;
        ++i;
        while (i < src.size() && (digit(src[i]) || src[i] == '/')) ++i;
      }
      std::string lexeme(src.substr(start, i - start));
      if (date) {
        if (!Timestamp::try_parse(lexeme)) fail("invalid date '" + lexeme + "'", start, i - start);
        out.push_back({TokenKind::kDate, lexeme, start, i - start});
      } else {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), v);
        if (ec != std::errc{}) fail("integer out of range '" + lexeme + "'", start, i - start);
        out.push_back({TokenKind::kInt, lexeme, start, i - start});
      }
      if (i < src.size() && ident_char(src[i])) fail("malformed number", start, i - start + 1);
    } else if (c == '"') {
      ++i;
      std::string value;
      bool closed = false;
      while (i < src.size()) {
        if (src[i] == '\\' && i + 1 < src.size()) {
          value += src[i + 1];
          i += 2;
        } else if (src[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          value += src[i++];
        }
      }
      if (!closed) fail("unterminated string", start, i - start);
      out.push_back({TokenKind::kString, std::move(value), start, i - start});
    } else if (c == '=' || c == '<' || c == '>' || c == '!') {
      ++i;
      if (i < src.size() && src[i] == '=') ++i;
      std::string op(src.substr(start, i - start));
      if (op == "!") fail("expected '!='", start, 1);
      out.push_back({TokenKind::kOp, op, start, i - start});
    } else if (c == '(' || c == ')' || c == ',' || c == '.') {
      ++i;
      const TokenKind k = c == '(' ? TokenKind::kLParen
                          : c == ')' ? TokenKind::kRParen
                          : c == ',' ? TokenKind::kComma
                                     : TokenKind::kPeriod;
      out.push_back({k, std::string(1, c), start, 1});
    } else {
      fail(std::string("unexpected character '") + c + "'", start, 1);
    }
  }
  out.push_back({TokenKind::kEnd, "", src.size(), 0});
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

// Words with a meaning inside conditions; never read as constants or items.
inline bool condition_keyword(std::string_view w) {
  for (auto k : {"true", "false", "not", "and", "is"})
    if (iequals(w, k)) return true;
  return false;
}

inline bool item_identifier(std::string_view w) {
  if (w.empty() || !(std::islower(static_cast<unsigned char>(w[0])) || w[0] == '_')) return false;
  for (char c : w)
    if (!ident_char(c)) return false;
  return true;
}

inline bool bare_string(std::string_view s) {
  if (s.empty() || !std::isupper(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s)
    if (!ident_char(c)) return false;
  return !condition_keyword(s);
}

}  // namespace text

// Labels seen while parsing; lets callers without a scenario build flat hierarchies.
struct LabelUse {
  std::set<Label> entities;
  std::set<Label> datatypes;
  std::set<Label> purposes;
};

struct PolicyDocument {
  std::string source;
  PilotPolicy policy;
  // Keys: "datatype", "dcr", "dcr.entity", "dcr.condition", "dcr.purposes",
  // "dcr.retention", and the same under "transfers[k]" in sentence order.
  std::map<std::string, SourceSpan> spans;
  LabelUse labels;
};

namespace text {

class Parser {
 public:
  Parser(std::string_view src, const Hierarchies* hs) : src_(src), toks_(tokenize(src)), hs_(hs) {}

  PolicyDocument document() {
    PolicyDocument doc;
    doc.source = std::string(src_);
    doc_ = &doc;
    doc.policy = policy();
    doc_ = nullptr;
    return doc;
  }

  Condition standalone_condition() {
    Condition c = condition(false);
    expect_end();
    return c;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  SourceSpan span(const Token& t) const { return span_at(src_, t.offset, t.length); }
  SourceSpan span_between(std::size_t begin, std::size_t end) const {
    return span_at(src_, begin, end > begin ? end - begin : 0);
  }
  std::size_t last_end() const {
    if (pos_ == 0) return 0;
    const Token& t = toks_[pos_ - 1];
    return t.offset + t.length;
  }

  [[noreturn]] void fail(const std::string& msg, const Token& at) const {
    const std::string found = at.kind == TokenKind::kEnd ? "end of input" : "'" + at.text + "'";
    throw SyntaxError(msg + ", found " + found, span(at));
  }

  bool at_keyword(std::string_view kw, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::kIdent && iequals(t.text, kw);
  }

  void keyword(std::string_view kw) {
    if (!at_keyword(kw)) fail("expected '" + std::string(kw) + "'", peek());
    next();
  }

  void expect(TokenKind k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what, peek());
    next();
  }

  void expect_end() {
    if (peek().kind != TokenKind::kEnd) fail("expected end of input", peek());
  }

  Label label(const Hierarchy* h, std::set<Label>& seen, const char* what) {
    const Token& t = peek();
    if (t.kind != TokenKind::kIdent) fail(std::string("expected ") + what, t);
    next();
    if (h && !h->contains(t.text)) throw UnknownLabelError(h->domain(), t.text, span(t));
    seen.insert(t.text);
    return t.text;
  }

  Timestamp date() {
    const Token& t = peek();
    if (t.kind != TokenKind::kDate) fail("expected a date DD/MM/YYYY", t);
    next();
    return Timestamp::parse(t.text);
  }

  void record(const std::string& key, std::size_t begin) {
    if (doc_) doc_->spans[key] = span_between(begin, last_end());
  }

  // ------------------------------------------------------------------
  // Policies

  PilotPolicy policy() {
    PilotPolicy p;
    const std::size_t begin = peek().offset;
    p.dcr.entity = entity_label("dcr.entity");
    keyword("may");
    keyword("collect");
    keyword("data");
    keyword("of");
    keyword("type");
    const std::size_t dt_begin = peek().offset;
    p.datatype = label(hs_ ? &hs_->datatypes : nullptr, doc_->labels.datatypes, "a datatype");
    record("datatype", dt_begin);
    if (at_keyword("if")) {
      next();
      const std::size_t c_begin = peek().offset;
      p.dcr.condition = condition(true);
      record("dcr.condition", c_begin);
    }
    keyword("and");
    keyword("use");
    keyword("it");
    p.dcr.dur = usage("dcr");
    expect(TokenKind::kPeriod, "'.'");
    record("dcr", begin);

    for (std::size_t k = 0; peek().kind != TokenKind::kEnd; ++k) {
      const std::string prefix = "transfers[" + std::to_string(k) + "]";
      const std::size_t t_begin = peek().offset;
      DataCommunicationRule tr;
      keyword("this");
      keyword("data");
      keyword("may");
      keyword("be");
      keyword("transferred");
      keyword("to");
      tr.entity = entity_label(prefix + ".entity");
      keyword("which");
      keyword("may");
      keyword("use");
      keyword("it");
      tr.dur = usage(prefix);
      if (at_keyword("if")) {
        next();
        const std::size_t c_begin = peek().offset;
        tr.condition = condition(false);
        record(prefix + ".condition", c_begin);
      }
      expect(TokenKind::kPeriod, "'.'");
      record(prefix, t_begin);
      p.transfers.insert(std::move(tr));
    }
    return p;
  }

  Label entity_label(const std::string& key) {
    const std::size_t begin = peek().offset;
    Label l = label(hs_ ? &hs_->entities : nullptr, doc_->labels.entities, "an entity");
    record(key, begin);
    return l;
  }

  // `for <purposes> purposes until <date>`
  DataUsageRule usage(const std::string& prefix) {
    DataUsageRule d;
    keyword("for");
    const std::size_t begin = peek().offset;
    if (at_keyword("no") && at_keyword("purposes", 1)) {
      next();
    } else {
      d.purposes.insert(purpose());
      while (true) {
        if (peek().kind == TokenKind::kComma) {
          next();
          if (at_keyword("and")) next();
        } else if (at_keyword("and")) {
          next();
        } else {
          break;
        }
        d.purposes.insert(purpose());
      }
    }
    record(prefix + ".purposes", begin);
    keyword("purposes");
    keyword("until");
    const std::size_t r_begin = peek().offset;
    d.retention = date();
    record(prefix + ".retention", r_begin);
    return d;
  }

  Label purpose() {
    if (at_keyword("purposes") || at_keyword("and")) fail("expected a purpose", peek());
    return label(hs_ ? &hs_->purposes : nullptr, doc_ ? doc_->labels.purposes : scratch_, "a purpose");
  }

  // ------------------------------------------------------------------
  // Conditions
  //
  //   cond    := unary ('and' unary)*
  //   unary   := 'not' unary | 'true' | 'false' | '(' cond ')' | term relop term
  //   relop   := '=' | '!=' | '<' | '<=' | '>' | '>=' | 'is'
  //   term    := int | date | string | Ident | ident | ident '(' [term (',' term)*] ')'
  //
  // Inside a collection sentence, `and use it` ends the condition.

  Condition condition(bool stop_at_use) {
    Condition acc = unary();
    while (at_keyword("and")) {
      if (stop_at_use && at_keyword("use", 1) && at_keyword("it", 2)) break;
      next();
      acc = Condition::conj(acc, unary());
    }
    return acc;
  }

  Condition unary() {
    if (at_keyword("not")) {
      next();
      return Condition::negate(unary());
    }
    if (at_keyword("true")) {
      next();
      return Condition::tt();
    }
    if (at_keyword("false")) {
      next();
      return Condition::ff();
    }
    if (peek().kind == TokenKind::kLParen) {
      next();
      Condition c = condition(false);
      expect(TokenKind::kRParen, "')'");
      return c;
    }
    Term lhs = term();
    Predicate op = relop();
    Term rhs = term();
    return Condition::atom(op, std::move(lhs), std::move(rhs));
  }

  Predicate relop() {
    const Token& t = peek();
    if (at_keyword("is")) {
      next();
      return Predicate::kEq;
    }
    if (t.kind == TokenKind::kOp) {
      next();
      if (t.text == "=") return Predicate::kEq;
      if (t.text == "!=") return Predicate::kNe;
      if (t.text == "<") return Predicate::kLt;
      if (t.text == "<=") return Predicate::kLe;
      if (t.text == ">") return Predicate::kGt;
      if (t.text == ">=") return Predicate::kGe;
    }
    fail("expected a comparison", t);
  }

  Term term() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::kInt: {
        next();
        std::int64_t v = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        return Term::constant(Value{v});
      }
      case TokenKind::kDate: next(); return Term::constant(Value{Timestamp::parse(t.text)});
      case TokenKind::kString: next(); return Term::constant(Value{t.text});
      case TokenKind::kIdent: {
        if (condition_keyword(t.text)) fail("expected a term", t);
        next();
        if (peek().kind == TokenKind::kLParen) {
          next();
          std::vector<Term> args;
          if (peek().kind != TokenKind::kRParen) {
            args.push_back(term());
            while (peek().kind == TokenKind::kComma) {
              next();
              args.push_back(term());
            }
          }
          expect(TokenKind::kRParen, "')'");
          return Term::apply(t.text, std::move(args));
        }
        if (item_identifier(t.text)) return Term::item(t.text);
        return Term::constant(Value{t.text});
      }
      default: fail("expected a term", t);
    }
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const Hierarchies* hs_;
  PolicyDocument* doc_ = nullptr;
  std::set<Label> scratch_;
};

}  // namespace text

// With `hs == nullptr` labels are not checked, only collected in `labels`.
inline PolicyDocument parse_document(std::string_view src, const Hierarchies* hs) {
  return text::Parser(src, hs).document();
}

inline PilotPolicy parse_policy(std::string_view src, const Hierarchies& hs) {
  return parse_document(src, &hs).policy;
}

inline Condition parse_condition(std::string_view src) {
  return text::Parser(src, nullptr).standalone_condition();
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_value(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (auto* t = std::get_if<Timestamp>(&v)) return t->to_string();
  const auto& s = std::get<std::string>(v);
  if (text::bare_string(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline std::string render_term(const Term& t) {
  if (t.is_item()) return t.as_item().id;
  if (t.is_constant()) return render_value(t.as_constant().value);
  const auto& a = t.as_apply();
  std::string out = a.function + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ", ";
    out += render_term(a.args[i]);
  }
  return out + ")";
}

// Conjunctions print left-associatively; a right operand that is itself a
// conjunction gets parentheses, so parsing the output rebuilds the same tree.
inline std::string render_condition(const Condition& c) {
  switch (c.kind()) {
    case Condition::Kind::kTrue: return "true";
    case Condition::Kind::kFalse: return "false";
    case Condition::Kind::kAtom: {
      const char* op = c.predicate() == Predicate::kEq ? "is" : predicate_symbol(c.predicate());
      return render_term(c.lhs()) + " " + op + " " + render_term(c.rhs());
    }
    case Condition::Kind::kNot: {
      const auto& o = c.operand();
      if (o.kind() == Condition::Kind::kAnd) return "not (" + render_condition(o) + ")";
      return "not " + render_condition(o);
    }
    case Condition::Kind::kAnd: {
      std::string r = render_condition(c.right());
      if (c.right().kind() == Condition::Kind::kAnd) r = "(" + r + ")";
      return render_condition(c.left()) + " and " + r;
    }
  }
  return "";
}

inline std::string render_purposes(const PurposeSet& ps) {
  if (ps.empty()) return "no";
  std::vector<std::string> v(ps.begin(), ps.end());
  std::string out = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) out += (i + 1 == v.size() ? " and " : ", ") + v[i];
  return out;
}

inline std::string render_usage(const DataUsageRule& d) {
  return "use it for " + render_purposes(d.purposes) + " purposes until " + d.retention.to_string();
}

inline std::string render_policy(const PilotPolicy& p) {
  std::string out = p.dcr.entity + " may collect data of type " + p.datatype;
  if (!p.dcr.condition.is_tt()) out += " if " + render_condition(p.dcr.condition);
  out += " and " + render_usage(p.dcr.dur) + ".";
  for (const auto& tr : p.transfers) {
    out += "\nThis data may be transferred to " + tr.entity + " which may " + render_usage(tr.dur);
    if (!tr.condition.is_tt()) out += " if " + render_condition(tr.condition);
    out += ".";
  }
  return out;
}

}  // namespace pilot
