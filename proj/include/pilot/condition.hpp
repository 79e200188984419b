#pragma once

// Terms, conditions and their three-valued evaluation, plus the syntactic
// entailment check used by rule subsumption.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pilot/error.hpp"
#include "pilot/timestamp.hpp"

namespace pilot {

using DeviceId = std::string;
using ItemId = std::string;

// Defined values. The undefined value is modelled as an empty optional.
using Value = std::variant<std::int64_t, Timestamp, std::string>;
using MaybeValue = std::optional<Value>;

// nu: (device, item) -> value. Absent keys are undefined.
using Valuation = std::map<std::pair<DeviceId, ItemId>, Value>;

enum class TruthValue { kFalse, kTrue, kUndefined };

inline const char* to_string(TruthValue v) {
  switch (v) {
    case TruthValue::kFalse: return "false";
    case TruthValue::kTrue: return "true";
    case TruthValue::kUndefined: return "undefined";
  }
  return "?";
}

inline std::string value_key(const Value& v) {
  struct Visitor {
    std::string operator()(std::int64_t i) const { return "#" + std::to_string(i); }
    std::string operator()(const Timestamp& t) const { return "D" + std::to_string(t.days()); }
    std::string operator()(const std::string& s) const {
      std::string out = "'";
      for (char c : s) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
      }
      return out + "'";
    }
  };
  return std::visit(Visitor{}, v);
}

struct Term {
  struct Item {
    ItemId id;
  };
  struct Constant {
    Value value;
  };
  struct Apply {
    std::string function;
    std::vector<Term> args;
  };

  std::variant<Item, Constant, Apply> node;

  static Term item(ItemId id) { return Term{Item{std::move(id)}}; }
  static Term constant(Value v) { return Term{Constant{std::move(v)}}; }
  static Term apply(std::string fn, std::vector<Term> args) {
    return Term{Apply{std::move(fn), std::move(args)}};
  }

  bool is_item() const { return std::holds_alternative<Item>(node); }
  bool is_constant() const { return std::holds_alternative<Constant>(node); }
  bool is_apply() const { return std::holds_alternative<Apply>(node); }
  const Item& as_item() const { return std::get<Item>(node); }
  const Constant& as_constant() const { return std::get<Constant>(node); }
  const Apply& as_apply() const { return std::get<Apply>(node); }

  std::string key() const {
    if (is_item()) return "$" + as_item().id;
    if (is_constant()) return value_key(as_constant().value);
    const auto& a = as_apply();
    std::string out = a.function + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i) out += ",";
      out += a.args[i].key();
    }
    return out + ")";
  }

  friend bool operator==(const Term& a, const Term& b) { return a.key() == b.key(); }
};

enum class Predicate { kEq, kNe, kLt, kLe, kGt, kGe };

inline const char* predicate_symbol(Predicate p) {
  switch (p) {
    case Predicate::kEq: return "=";
    case Predicate::kNe: return "!=";
    case Predicate::kLt: return "<";
    case Predicate::kLe: return "<=";
    case Predicate::kGt: return ">";
    case Predicate::kGe: return ">=";
  }
  return "?";
}

// Immutable condition tree with structural identity: two conditions are equal
// iff their trees are identical. The structural key is computed once per node.
class Condition {
 public:
  enum class Kind { kTrue, kFalse, kAtom, kNot, kAnd };

  Condition() : Condition(tt()) {}

  static Condition tt() {
    static const Condition c{std::make_shared<Node>(Node{Kind::kTrue, {}, {}, {}, {}, "T"})};
    return c;
  }
  static Condition ff() {
    static const Condition c{std::make_shared<Node>(Node{Kind::kFalse, {}, {}, {}, {}, "F"})};
    return c;
  }
  static Condition atom(Predicate p, Term lhs, Term rhs) {
    std::string key = std::string("(") + predicate_symbol(p) + " " + lhs.key() + " " + rhs.key() + ")";
    return Condition{std::make_shared<Node>(
        Node{Kind::kAtom, p, std::move(lhs), std::move(rhs), {}, std::move(key)})};
  }
  static Condition negate(Condition c) {
    std::string key = "(! " + c.key() + ")";
    return Condition{std::make_shared<Node>(
        Node{Kind::kNot, Predicate::kEq, {}, {}, {std::move(c)}, std::move(key)})};
  }
  static Condition conj(Condition a, Condition b) {
    std::string key = "(& " + a.key() + " " + b.key() + ")";
    return Condition{std::make_shared<Node>(
        Node{Kind::kAnd, Predicate::kEq, {}, {}, {std::move(a), std::move(b)}, std::move(key)})};
  }

  Kind kind() const { return node_->kind; }
  bool is_tt() const { return kind() == Kind::kTrue; }
  bool is_ff() const { return kind() == Kind::kFalse; }

  Predicate predicate() const { return node_->predicate; }
  const Term& lhs() const { return node_->lhs; }
  const Term& rhs() const { return node_->rhs; }
  const Condition& operand() const { return node_->children.at(0); }
  const Condition& left() const { return node_->children.at(0); }
  const Condition& right() const { return node_->children.at(1); }

  const std::string& key() const { return node_->key; }

  friend bool operator==(const Condition& a, const Condition& b) { return a.key() == b.key(); }
  friend std::strong_ordering operator<=>(const Condition& a, const Condition& b) {
    return a.key().compare(b.key()) <=> 0;
  }

 private:
  struct Node {
    Kind kind;
    Predicate predicate;
    Term lhs;
    Term rhs;
    std::vector<Condition> children;
    std::string key;
  };

  explicit Condition(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Interpretations

// Built-in function symbols. Interpretations are shared by every device and
// are strict: an undefined or ill-typed argument yields undefined.
struct FunctionSymbol {
  std::size_t arity;
  std::function<MaybeValue(const std::vector<Value>&)> fn;
};

inline const std::map<std::string, FunctionSymbol, std::less<>>& builtin_functions() {
  static const std::map<std::string, FunctionSymbol, std::less<>> table = [] {
    std::map<std::string, FunctionSymbol, std::less<>> t;
    auto ints = [](auto op) {
      return [op](const std::vector<Value>& a) -> MaybeValue {
        auto* x = std::get_if<std::int64_t>(&a[0]);
        auto* y = std::get_if<std::int64_t>(&a[1]);
        if (!x || !y) return std::nullopt;
        return Value{op(*x, *y)};
      };
    };
    t["plus"] = {2, ints(std::plus<std::int64_t>{})};
    t["minus"] = {2, ints(std::minus<std::int64_t>{})};
    t["days_between"] = {2, [](const std::vector<Value>& a) -> MaybeValue {
                           auto* x = std::get_if<Timestamp>(&a[0]);
                           auto* y = std::get_if<Timestamp>(&a[1]);
                           if (!x || !y) return std::nullopt;
                           return Value{y->days() - x->days()};
                         }};
    return t;
  }();
  return table;
}

inline MaybeValue evaluate(const Term& t, const Valuation& nu, std::string_view device) {
  if (t.is_constant()) return t.as_constant().value;
  if (t.is_item()) {
    auto it = nu.find({std::string(device), t.as_item().id});
    if (it == nu.end()) return std::nullopt;
    return it->second;
  }
  const auto& app = t.as_apply();
  const auto& table = builtin_functions();
  auto fn = table.find(app.function);
  if (fn == table.end() || fn->second.arity != app.args.size()) {
    throw UnregisteredSymbolError(app.function + "/" + std::to_string(app.args.size()));
  }
  std::vector<Value> args;
  args.reserve(app.args.size());
  bool undefined = false;
  for (const auto& a : app.args) {
    auto v = evaluate(a, nu, device);
    if (!v) {
      undefined = true;
    } else {
      args.push_back(std::move(*v));
    }
  }
  if (undefined) return std::nullopt;
  return fn->second.fn(args);
}

// Equality is total over defined values (values of different sorts are
// unequal); orderings only relate integers to integers and dates to dates.
inline TruthValue interpret(Predicate p, const Value& a, const Value& b) {
  auto lift = [](bool x) { return x ? TruthValue::kTrue : TruthValue::kFalse; };
  if (p == Predicate::kEq) return lift(a == b);
  if (p == Predicate::kNe) return lift(a != b);
  if (a.index() != b.index() || std::holds_alternative<std::string>(a)) {
    return TruthValue::kUndefined;
  }
  const auto cmp = a <=> b;
  switch (p) {
    case Predicate::kLt: return lift(cmp < 0);
    case Predicate::kLe: return lift(cmp <= 0);
    case Predicate::kGt: return lift(cmp > 0);
    case Predicate::kGe: return lift(cmp >= 0);
    default: return TruthValue::kUndefined;
  }
}

inline TruthValue evaluate(const Condition& phi, const Valuation& nu, std::string_view device) {
  switch (phi.kind()) {
    case Condition::Kind::kTrue: return TruthValue::kTrue;
    case Condition::Kind::kFalse: return TruthValue::kFalse;
    case Condition::Kind::kAtom: {
      auto a = evaluate(phi.lhs(), nu, device);
      auto b = evaluate(phi.rhs(), nu, device);
      if (!a || !b) return TruthValue::kUndefined;
      return interpret(phi.predicate(), *a, *b);
    }
    case Condition::Kind::kNot: {
      auto v = evaluate(phi.operand(), nu, device);
      if (v == TruthValue::kUndefined) return v;
      return v == TruthValue::kTrue ? TruthValue::kFalse : TruthValue::kTrue;
    }
    case Condition::Kind::kAnd: {
      // Strict: both operands are evaluated and any undefined operand wins.
      auto l = evaluate(phi.left(), nu, device);
      auto r = evaluate(phi.right(), nu, device);
      if (l == TruthValue::kUndefined || r == TruthValue::kUndefined) return TruthValue::kUndefined;
      return (l == TruthValue::kTrue && r == TruthValue::kTrue) ? TruthValue::kTrue
                                                                : TruthValue::kFalse;
    }
  }
  return TruthValue::kUndefined;
}

// ---------------------------------------------------------------------------
// Structural helpers

inline void collect_items(const Term& t, std::set<ItemId>& out) {
  if (t.is_item()) {
    out.insert(t.as_item().id);
  } else if (t.is_apply()) {
    for (const auto& a : t.as_apply().args) collect_items(a, out);
  }
}

inline void collect_items(const Condition& phi, std::set<ItemId>& out) {
  switch (phi.kind()) {
    case Condition::Kind::kAtom:
      collect_items(phi.lhs(), out);
      collect_items(phi.rhs(), out);
      break;
    case Condition::Kind::kNot: collect_items(phi.operand(), out); break;
    case Condition::Kind::kAnd:
      collect_items(phi.left(), out);
      collect_items(phi.right(), out);
      break;
    default: break;
  }
}

inline std::set<ItemId> referenced_items(const Condition& phi) {
  std::set<ItemId> out;
  collect_items(phi, out);
  return out;
}

inline void collect_functions(const Term& t, std::set<std::string>& out) {
  if (!t.is_apply()) return;
  out.insert(t.as_apply().function + "/" + std::to_string(t.as_apply().args.size()));
  for (const auto& a : t.as_apply().args) collect_functions(a, out);
}

inline void flatten_conjuncts(const Condition& phi, std::vector<Condition>& out) {
  if (phi.kind() == Condition::Kind::kAnd) {
    flatten_conjuncts(phi.left(), out);
    flatten_conjuncts(phi.right(), out);
  } else {
    out.push_back(phi);
  }
}

inline Condition conjoin(const std::vector<Condition>& parts) {
  if (parts.empty()) return Condition::tt();
  Condition acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = Condition::conj(acc, parts[i]);
  return acc;
}

namespace detail {

// True when phi has the same defined truth value under every valuation.
inline bool closed_and_defined(const Condition& phi) {
  if (!referenced_items(phi).empty()) return false;
  try {
    return evaluate(phi, Valuation{}, "") != TruthValue::kUndefined;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace detail

// Canonical form: conjunctions are flattened, sorted and deduplicated, `tt`
// conjuncts are dropped, and `ff` absorbs every conjunct that can never be
// undefined. Three-valued evaluation is preserved for all valuations.
inline Condition normalize(const Condition& phi) {
  switch (phi.kind()) {
    case Condition::Kind::kNot: return Condition::negate(normalize(phi.operand()));
    case Condition::Kind::kAnd: {
      std::vector<Condition> parts;
      flatten_conjuncts(normalize(phi.left()), parts);
      flatten_conjuncts(normalize(phi.right()), parts);
      std::set<Condition> unique;
      bool has_ff = false;
      for (auto& c : parts) {
        if (c.is_tt()) continue;
        if (c.is_ff()) has_ff = true;
        unique.insert(c);
      }
      std::vector<Condition> kept;
      for (const auto& c : unique) {
        if (has_ff && !c.is_ff() && detail::closed_and_defined(c)) continue;
        kept.push_back(c);
      }
      return conjoin(kept);
    }
    default: return phi;
  }
}

// ---------------------------------------------------------------------------
// Entailment

namespace detail {

inline Predicate flip(Predicate p) {
  switch (p) {
    case Predicate::kLt: return Predicate::kGt;
    case Predicate::kLe: return Predicate::kGe;
    case Predicate::kGt: return Predicate::kLt;
    case Predicate::kGe: return Predicate::kLe;
    default: return p;
  }
}

// An atom of the shape `item op constant`, reoriented if necessary.
struct ItemConstraint {
  ItemId item;
  Predicate op;
  Value constant;
};

inline std::optional<ItemConstraint> as_item_constraint(const Condition& phi) {
  if (phi.kind() != Condition::Kind::kAtom) return std::nullopt;
  if (phi.lhs().is_item() && phi.rhs().is_constant()) {
    return ItemConstraint{phi.lhs().as_item().id, phi.predicate(), phi.rhs().as_constant().value};
  }
  if (phi.rhs().is_item() && phi.lhs().is_constant()) {
    return ItemConstraint{phi.rhs().as_item().id, flip(phi.predicate()),
                          phi.lhs().as_constant().value};
  }
  return std::nullopt;
}

inline std::optional<std::int64_t> ordinal(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (auto* t = std::get_if<Timestamp>(&v)) return t->days();
  return std::nullopt;
}

// Closed integer interval over one value sort (integers or dates).
struct Interval {
  std::size_t sort;
  std::int64_t lo = std::numeric_limits<std::int64_t>::min();
  std::int64_t hi = std::numeric_limits<std::int64_t>::max();
  bool empty() const { return lo > hi; }
};

inline std::optional<Interval> interval_of(Predicate op, const Value& c) {
  auto k = ordinal(c);
  if (!k) return std::nullopt;
  Interval iv{c.index()};
  constexpr auto kMin = std::numeric_limits<std::int64_t>::min();
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  switch (op) {
    case Predicate::kEq: iv.lo = iv.hi = *k; break;
    case Predicate::kLt:
      if (*k == kMin) iv.lo = 1, iv.hi = 0; else iv.hi = *k - 1;
      break;
    case Predicate::kLe: iv.hi = *k; break;
    case Predicate::kGt:
      if (*k == kMax) iv.lo = 1, iv.hi = 0; else iv.lo = *k + 1;
      break;
    case Predicate::kGe: iv.lo = *k; break;
    case Predicate::kNe: return std::nullopt;
  }
  return iv;
}

inline Value value_of_sort(std::size_t sort, std::int64_t k) {
  if (sort == 0) return Value{k};
  return Value{Timestamp{k}};
}

inline bool entails_normalized(const Condition& a, const Condition& b) {
  if (b.is_tt() || a.is_ff() || a == b) return true;
  if (b.kind() == Condition::Kind::kAnd) {
    std::vector<Condition> bs;
    flatten_conjuncts(b, bs);
    return std::all_of(bs.begin(), bs.end(),
                       [&a](const Condition& bi) { return entails_normalized(a, bi); });
  }

  std::vector<Condition> as;
  flatten_conjuncts(a, as);
  for (const auto& ai : as) {
    if (ai.is_ff() || ai == b) return true;
  }

  // Collect what the conjuncts of `a` force on individual items.
  std::map<ItemId, Value> pinned;
  std::map<ItemId, std::optional<Interval>> intervals;  // nullopt: mixed sorts, ignored
  for (const auto& ai : as) {
    auto c = as_item_constraint(ai);
    if (!c) continue;
    if (c->op == Predicate::kEq) {
      auto [it, inserted] = pinned.emplace(c->item, c->constant);
      if (!inserted && it->second != c->constant) return true;  // a is unsatisfiable
    }
    auto iv = interval_of(c->op, c->constant);
    if (!iv) continue;
    auto [it, inserted] = intervals.emplace(c->item, iv);
    if (inserted) continue;
    if (!it->second) continue;
    if (it->second->sort != iv->sort) {
      it->second.reset();
      continue;
    }
    it->second->lo = std::max(it->second->lo, iv->lo);
    it->second->hi = std::min(it->second->hi, iv->hi);
  }
  for (const auto& [item, iv] : intervals) {
    if (!iv) continue;
    if (iv->empty()) return true;
    if (iv->lo == iv->hi && !pinned.count(item)) pinned.emplace(item, value_of_sort(iv->sort, iv->lo));
  }

  // Every item b mentions is pinned to a single value: evaluate b directly.
  auto items = referenced_items(b);
  if (!items.empty() &&
      std::all_of(items.begin(), items.end(), [&](const ItemId& i) { return pinned.count(i) != 0; })) {
    Valuation nu;
    for (const auto& i : items) nu.emplace(std::make_pair(std::string(), i), pinned.at(i));
    try {
      if (evaluate(b, nu, "") == TruthValue::kTrue) return true;
    } catch (const Error&) {
    }
  }

  // Interval containment for `item op constant` against the collected bounds.
  if (auto c = as_item_constraint(b)) {
    auto it = intervals.find(c->item);
    if (it != intervals.end() && it->second && ordinal(c->constant) &&
        c->constant.index() == it->second->sort) {
      const Interval& have = *it->second;
      const std::int64_t k = *ordinal(c->constant);
      if (c->op == Predicate::kNe) return k < have.lo || k > have.hi;
      auto want = interval_of(c->op, c->constant);
      if (want && want->lo <= have.lo && have.hi <= want->hi) return true;
    }
  }
  return false;
}

}  // namespace detail

// Sound, incomplete entailment: entails(a, b) implies that every valuation
// making `a` true makes `b` true. `a` is the stronger condition.
inline bool entails(const Condition& a, const Condition& b) {
  return detail::entails_normalized(normalize(a), normalize(b));
}

}  // namespace pilot
