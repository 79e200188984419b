#include <gtest/gtest.h>

#include <chrono>

#include "pilot/risk_analyzer.hpp"
#include "support/anpr.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/risk_table.hpp"

namespace pilot {
namespace {

using testing::p_no_trans;
using testing::p_trans;

const std::array<Query, 6>& risk_table_queries() {
  static const std::array<Query, 6> qs{
      Query::can_receive("Parket", "plate_Alice"),
      Query::can_receive("ParketWW", "plate_Alice"),
      Query::can_receive("CarInsure", "plate_Alice"),
      Query::can_use_other_than("Parket", "plate_Alice", {"commercial_offers"}),
      Query::can_use_other_than("ParketWW", "plate_Alice", {"commercial_offers"}),
      Query::can_use("CarInsure", "plate_Alice", "profiling"),
  };
  return qs;
}

Universe column(int c) {
  const bool trans = c % 2 == 0;
  return testing::anpr_universe(trans ? p_trans() : p_no_trans(), trans ? p_trans() : p_no_trans(), c >= 2);
}

TEST(RiskAnalyzer, RiskTableFromStructuralPolicies) {
  for (int c = 0; c < 4; ++c) {
    const auto u = column(c);
    const auto g = explore(u);
    for (std::size_t r = 0; r < 6; ++r) {
      const auto v = answer(risk_table_queries()[r], g, u);
      const auto want = testing::risk_table()[r].cells[c];
      EXPECT_EQ(v.answer, want.yes) << "row " << r << " column " << c;
      EXPECT_EQ(!v.respected, want.red) << "row " << r << " column " << c;
      EXPECT_TRUE(witness_valid(u, risk_table_queries()[r], v));
    }
  }
}

bool illegal_transfer_before_last(const std::vector<Event>& w) {
  for (std::size_t k = 0; k + 1 < w.size(); ++k)
    if (w[k].kind == EventKind::kIllegalTransfer && w[k].sender == "ParketWW" && w[k].receiver == "CarInsure")
      return true;
  return false;
}

TEST(RiskAnalyzer, RedWitnessesGoThroughTheIllegalTransfer) {
  const auto u = column(2);
  const auto receive = verify(u, risk_table_queries()[2]);
  ASSERT_TRUE(receive.answer);
  ASSERT_FALSE(receive.witness.empty());
  EXPECT_EQ(receive.witness.back().kind, EventKind::kIllegalTransfer);
  EXPECT_EQ(receive.witness.back().receiver, "CarInsure");
  const auto use = verify(u, risk_table_queries()[5]);
  ASSERT_TRUE(use.answer);
  EXPECT_EQ(use.witness.back().kind, EventKind::kIllegalUse);
  EXPECT_TRUE(illegal_transfer_before_last(use.witness));
}

TEST(RiskAnalyzer, WitnessesAreShortest) {
  const auto u = column(0);
  const auto v = verify(u, Query::can_receive("ParketWW", "plate_Alice"));
  // Parket requests, ParketWW requests, Alice sends, Parket transfers.
  EXPECT_EQ(v.witness.size(), 4u);
  EXPECT_EQ(verify(u, Query::can_receive("Parket", "plate_Alice")).witness.size(), 2u);
}

TEST(RiskAnalyzer, OwnerReceivesByOwnership) {
  const auto v = verify(column(0), Query::can_receive("Alice", "plate_Alice"));
  EXPECT_TRUE(v.answer);
  EXPECT_TRUE(v.by_ownership);
  EXPECT_TRUE(v.witness.empty());
  EXPECT_TRUE(v.respected);
}

TEST(RiskAnalyzer, ParketWWNeverReceivesWithoutTransferRule) {
  const auto u = column(1);
  const auto g = explore(u);
  for (const auto& st : g.states) EXPECT_FALSE(st.holds("ParketWW", "plate_Alice"));
}

TEST(RiskAnalyzer, UnknownLabelsInQueries) {
  EXPECT_THROW(verify(column(0), Query::can_receive("Nobody", "plate_Alice")), UnknownLabelError);
  EXPECT_THROW(verify(column(0), Query::can_use("Parket", "plate_Alice", "telemetry")), UnknownLabelError);
  EXPECT_THROW(verify(column(0), Query::can_receive("Parket", "plate_Bob")), ValidationError);
}

TEST(RiskAnalyzer, EmptyUniverseHasOneState) {
  EXPECT_EQ(explore(Universe{}).size(), 1u);
}

TEST(RiskAnalyzer, BudgetExceeded) {
  try {
    explore(column(2), {5});
    FAIL();
  } catch (const BudgetExceededError& e) {
    EXPECT_EQ(e.violation(), "state-budget-exceeded");
  }
}

TEST(RiskAnalyzer, MatrixShape) {
  const auto base = column(0);
  const std::vector<PolicyVariant> pvs{{"p_trans", {}}};
  const std::vector<AssumptionVariant> avs{{"none", {}}};
  EXPECT_TRUE(answer_matrix(base, pvs, avs, {}).cells.empty());
  const NamedQuery q{"q", "", risk_table_queries()[1]};
  const auto m = answer_matrix(base, pvs, avs, {q});
  ASSERT_EQ(m.cells.size(), 1u);
  ASSERT_EQ(m.cells[0].size(), 1u);
  EXPECT_EQ(m.cells[0][0], verify(base, q.query));
}

TEST(RiskAnalyzer, UnknownAssumptionInVariant) {
  EXPECT_THROW(with_variant(column(2), nullptr, {"nope"}), ValidationError);
}

// ---------------------------------------------------------------------------
// Properties over random universes

std::vector<Query> queries_for(const Universe& u) {
  std::vector<Query> out;
  for (const auto& e : u.hierarchies.entities.labels())
    for (const auto& i : u.items) {
      out.push_back(Query::can_receive(e, i.id));
      for (const auto& p : u.hierarchies.purposes.labels()) {
        out.push_back(Query::can_use(e, i.id, p));
        out.push_back(Query::can_use_other_than(e, i.id, {p}));
      }
    }
  return out;
}

TEST(RiskAnalyzerProperty, AgreesWithSequenceEnumeration) {
  testing::Rng rng(41);
  int yes = 0, red = 0, compared = 0;
  for (int k = 0; k < 60; ++k) {
    const auto [u, g] = testing::explored_random_universe(rng);
    testing::SequenceSearch search;
    try {
      search = testing::enumerate_sequences(u, true, 200000);
    } catch (const std::runtime_error&) {
      continue;
    }
    ASSERT_EQ(search.states.size(), g.size());
    ++compared;
    for (const auto& q : queries_for(u)) {
      const auto v = answer(q, g, u);
      const auto o = testing::oracle_answer(u, q, search);
      ASSERT_EQ(v.answer, o.answer);
      ASSERT_EQ(v.respected, o.respected);
      ASSERT_TRUE(witness_valid(u, q, v));
      yes += v.answer;
      red += !v.respected;
    }
  }
  EXPECT_GE(compared, 40);
  EXPECT_GT(yes, 0);
  EXPECT_GT(red, 0);
}

TEST(RiskAnalyzerProperty, Deterministic) {
  testing::Rng rng(42);
  for (int k = 0; k < 30; ++k) {
    const auto [u, a] = testing::explored_random_universe(rng);
    const auto b = explore(u, {3000});
    ASSERT_EQ(a.states, b.states);
    for (const auto& q : queries_for(u)) ASSERT_EQ(answer(q, a, u), answer(q, b, u));
  }
}

TEST(RiskAnalyzerProperty, AddingAnAssumptionNeverRemovesAYes) {
  testing::Rng rng(43);
  for (int k = 0; k < 60; ++k) {
    auto [u, before] = testing::explored_random_universe(rng, 3000, false);
    u.assumptions.push_back({"leak", IllegalTransferCapability{rng.pick(u.hierarchies.entities.labels()),
                                                               rng.pick(u.hierarchies.entities.labels()), std::nullopt},
                             ""});
    u.assumptions.push_back(
        {"abuse", IllegalUseInterest{rng.pick(u.hierarchies.entities.labels()), rng.pick(u.hierarchies.purposes.labels()), std::nullopt},
         ""});
    const auto after = explore(u);
    Universe plain = u;
    plain.assumptions.clear();
    for (const auto& q : queries_for(u)) {
      if (answer(q, before, plain).answer) {
        ASSERT_TRUE(answer(q, after, u).answer);
      }
    }
  }
}

}  // namespace
}  // namespace pilot
