#include <gtest/gtest.h>

#include "pilot/condition.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace pilot {
namespace {

using testing::T3;

Term item(const char* i) { return Term::item(i); }
Term num(std::int64_t v) { return Term::constant(Value{v}); }
Term str(const char* s) { return Term::constant(Value{std::string(s)}); }
Condition eq(Term a, Term b) { return Condition::atom(Predicate::kEq, std::move(a), std::move(b)); }

Valuation at_device(std::initializer_list<std::pair<const char*, Value>> xs) {
  Valuation nu;
  for (const auto& [i, v] : xs) nu[{"d", i}] = v;
  return nu;
}

TEST(Evaluate, LyonCondition) {
  const auto phi = eq(item("car_location"), str("Lyon"));
  EXPECT_EQ(evaluate(phi, at_device({{"car_location", Value{std::string("Lyon")}}}), "d"), TruthValue::kTrue);
  EXPECT_EQ(evaluate(phi, at_device({{"car_location", Value{std::string("Paris")}}}), "d"), TruthValue::kFalse);
  EXPECT_EQ(evaluate(phi, Valuation{}, "d"), TruthValue::kUndefined);
}

TEST(Evaluate, ValuesAreReadAtTheGivenDevice) {
  const auto phi = eq(item("x"), num(1));
  Valuation nu;
  nu[{"other", "x"}] = Value{std::int64_t{1}};
  EXPECT_EQ(evaluate(phi, nu, "d"), TruthValue::kUndefined);
  EXPECT_EQ(evaluate(phi, nu, "other"), TruthValue::kTrue);
}

TEST(Evaluate, ConjunctionIsStrictInUndefined) {
  const auto undefined = eq(item("missing"), num(0));
  EXPECT_EQ(evaluate(Condition::conj(Condition::ff(), undefined), Valuation{}, "d"), TruthValue::kUndefined);
  EXPECT_EQ(evaluate(Condition::conj(undefined, Condition::ff()), Valuation{}, "d"), TruthValue::kUndefined);
  EXPECT_EQ(evaluate(Condition::negate(undefined), Valuation{}, "d"), TruthValue::kUndefined);
}

TEST(Evaluate, OrderingAcrossSortsIsUndefinedAndEqualityIsFalse) {
  const Valuation nu = at_device({{"x", Value{std::int64_t{3}}}});
  EXPECT_EQ(evaluate(Condition::atom(Predicate::kLt, item("x"), str("Lyon")), nu, "d"), TruthValue::kUndefined);
  EXPECT_EQ(evaluate(eq(item("x"), str("Lyon")), nu, "d"), TruthValue::kFalse);
  EXPECT_EQ(evaluate(Condition::atom(Predicate::kNe, item("x"), str("Lyon")), nu, "d"), TruthValue::kTrue);
}

TEST(Evaluate, Functions) {
  const Valuation nu = at_device({{"x", Value{std::int64_t{3}}}, {"d1", Value{Timestamp{10}}}, {"d2", Value{Timestamp{17}}}});
  EXPECT_EQ(evaluate(eq(Term::apply("plus", {item("x"), num(2)}), num(5)), nu, "d"), TruthValue::kTrue);
  EXPECT_EQ(evaluate(eq(Term::apply("days_between", {item("d1"), item("d2")}), num(7)), nu, "d"), TruthValue::kTrue);
  EXPECT_EQ(evaluate(eq(Term::apply("plus", {item("nope"), num(2)}), num(5)), nu, "d"), TruthValue::kUndefined);
  EXPECT_THROW(evaluate(eq(Term::apply("times", {item("x"), num(2)}), num(6)), nu, "d"), UnregisteredSymbolError);
  EXPECT_THROW(evaluate(eq(Term::apply("plus", {item("x")}), num(6)), nu, "d"), UnregisteredSymbolError);
}

TEST(Normalize, Examples) {
  const auto lyon = eq(item("car_location"), str("Lyon"));
  EXPECT_EQ(normalize(Condition::conj(Condition::tt(), lyon)), lyon);
  EXPECT_EQ(normalize(Condition::conj(lyon, lyon)), lyon);
  // ff absorbs closed, defined conjuncts; an item atom could be undefined and stays.
  EXPECT_EQ(normalize(Condition::conj(eq(num(1), num(1)), Condition::ff())), Condition::ff());
  const auto a1 = eq(item("a"), num(1));
  EXPECT_EQ(evaluate(normalize(Condition::conj(a1, Condition::ff())), Valuation{}, "d"), TruthValue::kUndefined);
}

TEST(Normalize, ConjunctionOrderDoesNotMatter) {
  const auto a = eq(item("a"), num(1));
  const auto b = eq(item("b"), num(2));
  const auto c = eq(item("c"), num(3));
  EXPECT_EQ(normalize(Condition::conj(Condition::conj(a, b), c)), normalize(Condition::conj(c, Condition::conj(b, a))));
}

TEST(Entails, Examples) {
  const auto lyon = eq(item("car_location"), str("Lyon"));
  EXPECT_TRUE(entails(lyon, Condition::tt()));
  EXPECT_FALSE(entails(Condition::tt(), lyon));
  EXPECT_TRUE(entails(Condition::conj(lyon, eq(item("a"), num(1))), lyon));
  EXPECT_TRUE(entails(Condition::atom(Predicate::kGe, item("a"), num(3)), Condition::atom(Predicate::kGt, item("a"), num(1))));
  EXPECT_FALSE(entails(Condition::atom(Predicate::kGt, item("a"), num(1)), Condition::atom(Predicate::kGe, item("a"), num(3))));
  EXPECT_TRUE(entails(Condition::ff(), lyon));
}

// Every row of the evaluation table, compared against a direct transcription.
TEST(EvaluationTable, RandomConditionsMatchTheTable) {
  testing::Rng rng(21);
  testing::ConditionSpace sp;
  sp.mixed_sorts = true;
  for (int k = 0; k < 5000; ++k) {
    const auto phi = testing::random_condition(rng, sp);
    Valuation nu;
    for (const auto& [key, v] : testing::random_valuation(rng, sp)) nu[{"d", key.second}] = v;
    ASSERT_EQ(evaluate(phi, nu, "d"), testing::to_truth(testing::table_eval(phi, nu, "d")));
  }
}

TEST(NormalizeProperty, PreservesEvaluation) {
  testing::Rng rng(3);
  testing::ConditionSpace sp;
  sp.mixed_sorts = true;
  for (int k = 0; k < 3000; ++k) {
    const auto phi = testing::random_condition(rng, sp);
    const auto n = normalize(phi);
    for (int v = 0; v < 5; ++v) {
      const auto nu = testing::random_valuation(rng, sp, 0.3);
      ASSERT_EQ(evaluate(n, nu, ""), evaluate(phi, nu, ""));
    }
  }
}

TEST(NormalizeProperty, Idempotent) {
  testing::Rng rng(4);
  for (int k = 0; k < 2000; ++k) {
    const auto n = normalize(testing::random_condition(rng, {}));
    ASSERT_EQ(normalize(n), n);
  }
}

TEST(EvaluateProperty, UndefinedReferencedItemMakesTheResultUndefined) {
  testing::Rng rng(8);
  testing::ConditionSpace sp;
  for (int k = 0; k < 3000; ++k) {
    const auto phi = testing::random_condition(rng, sp);
    const auto items = referenced_items(phi);
    if (items.empty()) continue;
    auto nu = testing::random_valuation(rng, sp, 0.0);
    nu.erase({"", rng.pick(items)});
    ASSERT_EQ(evaluate(phi, nu, ""), TruthValue::kUndefined) << phi.key();
  }
}

// Over 3 items with 4 values each (plus undefined), a positive entailment
// never has a counterexample valuation.
TEST(EntailsProperty, SoundUnderExhaustiveValuations) {
  testing::Rng rng(99);
  testing::ConditionSpace sp;
  const auto valuations = testing::all_valuations(sp.items, sp.max_value);
  int positives = 0;
  for (int k = 0; k < 4000; ++k) {
    Condition a = rng.chance(0.5) ? testing::random_constraints(rng, sp) : testing::random_condition(rng, sp);
    Condition b = rng.chance(0.5) ? testing::random_constraints(rng, sp) : testing::random_condition(rng, sp);
    if (rng.chance(0.2)) b = a;
    if (!entails(a, b)) continue;
    ++positives;
    ASSERT_TRUE(testing::implies_exhaustively(a, b, valuations)) << a.key() << " |- " << b.key();
  }
  EXPECT_GT(positives, 200);
}

}  // namespace
}  // namespace pilot
