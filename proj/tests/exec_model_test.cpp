#include <gtest/gtest.h>

#include "pilot/exec_model.hpp"
#include "pilot/risk_analyzer.hpp"
#include "support/anpr.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace pilot {
namespace {

using testing::p_no_trans;
using testing::p_parketww;
using testing::p_trans;

const Value kPlate{std::string("GD-042-PR")};

Universe two_device_universe() {
  Universe u;
  u.hierarchies = testing::anpr_hierarchies();
  u.devices = {{"Alice", "Alice", DeviceKind::kSubject}, {"Parket", "Parket", DeviceKind::kController}};
  u.items = {{"plate_Alice", "number_plate", "Alice", kPlate}};
  u.policies = {{"Alice", {p_trans()}}, {"Parket", {p_no_trans()}}};
  u.clock.now = testing::date(1, 3, 2019);
  return u;
}

TEST(ExecModel, InitialState) {
  const auto u = two_device_universe();
  const auto st = initial_state(u);
  EXPECT_EQ(st.nu.size(), 1u);
  EXPECT_EQ(st.nu.at({"Alice", "plate_Alice"}), kPlate);
  EXPECT_EQ(st.policies("Alice"), (std::set<PolicyEntry>{{"Alice", p_trans()}}));
  EXPECT_TRUE(st.rho.empty());
}

TEST(ExecModel, RequestThenSendGivesTheExpectedState) {
  const auto u = two_device_universe();
  const Timestamp now = u.clock.now;
  auto st = initial_state(u);
  st = apply(u, request_event("Parket", "Alice", "number_plate", p_no_trans(), now), st);
  st = apply(u, send_event("Alice", "Parket", "plate_Alice", p_no_trans(), now), st);

  SystemState expected;
  expected.nu[{"Alice", "plate_Alice"}] = kPlate;
  expected.nu[{"Parket", "plate_Alice"}] = kPlate;
  expected.pi["Alice"] = {{"Alice", p_trans()}, {"Parket", p_no_trans()}};
  expected.pi["Parket"] = {{"Parket", p_no_trans()}};
  expected.rho["Parket"] = {{"Alice", "plate_Alice", p_no_trans()}};
  EXPECT_EQ(st, expected);
}

TEST(ExecModel, SendNeedsARequestFirst) {
  const auto u = two_device_universe();
  const auto send = send_event("Alice", "Parket", "plate_Alice", p_no_trans(), u.clock.now);
  EXPECT_FALSE(enabled(u, send, initial_state(u)));
  EXPECT_THROW(apply(u, send, initial_state(u)), NotEnabledError);
}

TEST(ExecModel, SendRequiresSubsumptionOfTheOwnersPolicy) {
  auto u = two_device_universe();
  u.policies["Alice"] = {p_no_trans()};
  u.policies["Parket"] = {p_trans()};
  auto st = initial_state(u);
  st = apply(u, request_event("Parket", "Alice", "number_plate", p_trans(), u.clock.now), st);
  EXPECT_FALSE(enabled(u, send_event("Alice", "Parket", "plate_Alice", p_trans(), u.clock.now), st));
}

TEST(ExecModel, SendingTwiceIsIdempotent) {
  const auto u = two_device_universe();
  auto st = apply(u, request_event("Parket", "Alice", "number_plate", p_no_trans(), u.clock.now), initial_state(u));
  const auto send = send_event("Alice", "Parket", "plate_Alice", p_no_trans(), u.clock.now);
  const auto once = apply(u, send, st);
  EXPECT_EQ(apply(u, send, once), once);
}

TEST(ExecModel, ExpiredPolicyBlocksCollection) {
  auto u = two_device_universe();
  u.clock.now = testing::date(22, 3, 2019);
  auto st = apply(u, request_event("Parket", "Alice", "number_plate", p_no_trans(), u.clock.now), initial_state(u));
  EXPECT_FALSE(enabled(u, send_event("Alice", "Parket", "plate_Alice", p_no_trans(), u.clock.now), st));
}

TEST(ExecModel, UndefinedConditionBlocksCollection) {
  auto u = two_device_universe();
  u.policies["Alice"] = {testing::alice_policy()};  // needs car_location, which Alice does not have
  auto st = apply(u, request_event("Parket", "Alice", "number_plate", p_no_trans(), u.clock.now), initial_state(u));
  EXPECT_FALSE(enabled(u, send_event("Alice", "Parket", "plate_Alice", p_no_trans(), u.clock.now), st));
}

TEST(ExecModel, TransferToParketWW) {
  const auto u = testing::anpr_universe(p_trans(), p_trans(), false);
  const Timestamp now = u.clock.now;
  auto st = initial_state(u);
  st = apply(u, request_event("Parket", "Alice", "number_plate", p_trans(), now), st);
  st = apply(u, request_event("ParketWW", "Parket", "number_plate", p_parketww(), now), st);
  st = apply(u, send_event("Alice", "Parket", "plate_Alice", p_trans(), now), st);
  st = apply(u, transfer_event("Parket", "ParketWW", "plate_Alice", p_parketww(), now), st);
  EXPECT_TRUE(st.received("ParketWW").count({"Parket", "plate_Alice", p_parketww()}));
  EXPECT_EQ(st.nu.at({"ParketWW", "plate_Alice"}), kPlate);
  EXPECT_TRUE(enabled(u, use_event("ParketWW", "plate_Alice", "commercial_offers", now), st));
  EXPECT_FALSE(enabled(u, use_event("ParketWW", "plate_Alice", "profiling", now), st));
}

TEST(ExecModel, NoTransferWithoutATransferRule) {
  const auto u = testing::anpr_universe(p_no_trans(), p_no_trans(), false);
  const Timestamp now = u.clock.now;
  auto st = initial_state(u);
  st = apply(u, request_event("Parket", "Alice", "number_plate", p_no_trans(), now), st);
  st = apply(u, request_event("ParketWW", "Parket", "number_plate", p_parketww(), now), st);
  st = apply(u, send_event("Alice", "Parket", "plate_Alice", p_no_trans(), now), st);
  EXPECT_FALSE(enabled(u, transfer_event("Parket", "ParketWW", "plate_Alice", p_parketww(), now), st));
}

TEST(ExecModel, IllegalTransferFilesTheReceiversOwnPolicyOrNoRights) {
  const auto u = testing::anpr_universe(p_trans(), p_trans(), true);
  const Timestamp now = u.clock.now;
  auto st = initial_state(u);
  st = apply(u, request_event("Parket", "Alice", "number_plate", p_trans(), now), st);
  st = apply(u, request_event("ParketWW", "Parket", "number_plate", p_parketww(), now), st);
  st = apply(u, send_event("Alice", "Parket", "plate_Alice", p_trans(), now), st);
  EXPECT_FALSE(enabled(u, illegal_transfer_event("Parket", "CarInsure", "plate_Alice", now), st));
  st = apply(u, transfer_event("Parket", "ParketWW", "plate_Alice", p_parketww(), now), st);
  st = apply(u, illegal_transfer_event("ParketWW", "CarInsure", "plate_Alice", now), st);
  ASSERT_EQ(st.received("CarInsure").size(), 1u);
  const auto& filed = st.received("CarInsure").begin()->policy;
  EXPECT_TRUE(filed.dcr.dur.purposes.empty());
  EXPECT_TRUE(filed.transfers.empty());
  EXPECT_FALSE(enabled(u, use_event("CarInsure", "plate_Alice", "profiling", now), st));
  EXPECT_TRUE(enabled(u, illegal_use_event("CarInsure", "plate_Alice", "profiling", now), st));
  EXPECT_FALSE(enabled(u, illegal_use_event("CarInsure", "plate_Alice", "commercial_offers", now), st));
}

TEST(ExecModel, EnumerateFromTheInitialState) {
  const auto u = testing::anpr_universe(p_trans(), p_trans(), true);
  const auto events = enumerate_events(u, initial_state(u));
  const auto request = request_event("Parket", "Alice", "number_plate", p_trans(), u.clock.now);
  EXPECT_NE(std::find(events.begin(), events.end(), request), events.end());
  for (const auto& e : events) EXPECT_EQ(e.kind, EventKind::kRequest);
}

TEST(ExecModel, DescribeAndNotation) {
  const auto e = illegal_transfer_event("ParketWW", "CarInsure", "plate_Alice", Timestamp{0});
  EXPECT_EQ(describe(e), "ParketWW illegally transfers plate_Alice to CarInsure");
  EXPECT_EQ(event_kind_from_string(to_string(EventKind::kIllegalUse)), EventKind::kIllegalUse);
}

// ---------------------------------------------------------------------------
// Properties over random universes

bool contains_all(const SystemState& big, const SystemState& small) {
  for (const auto& [k, v] : small.nu) {
    auto it = big.nu.find(k);
    if (it == big.nu.end() || it->second != v) return false;
  }
  for (const auto& [d, es] : small.pi)
    for (const auto& e : es)
      if (!big.policies(d).count(e)) return false;
  for (const auto& [d, es] : small.rho)
    for (const auto& e : es)
      if (!big.received(d).count(e)) return false;
  return true;
}

TEST(ExecModelProperty, ApplyIsMonotone) {
  testing::Rng rng(31);
  int steps = 0;
  for (int k = 0; k < 300; ++k) {
    const auto u = testing::random_universe(rng);
    auto st = initial_state(u);
    for (int n = 0; n < 12; ++n) {
      const auto events = enumerate_events(u, st);
      if (events.empty()) break;
      const auto& e = rng.pick(events);
      ASSERT_TRUE(enabled(u, e, st));
      const auto next = apply(u, e, st);
      ASSERT_TRUE(contains_all(next, st));
      st = next;
      ++steps;
    }
  }
  EXPECT_GT(steps, 1000);
}

TEST(ExecModelProperty, EnumeratedEventsAreWellTyped) {
  testing::Rng rng(32);
  for (int k = 0; k < 100; ++k) {
    const auto [u, g] = testing::explored_random_universe(rng);
    for (std::size_t s = 0; s < g.size(); ++s)
      for (const auto& t : g.edges[s]) {
        const Event& e = t.event;
        const auto kind = u.device(e.sender).kind;
        if (e.kind == EventKind::kRequest || e.kind == EventKind::kTransfer || e.kind == EventKind::kUse) {
          ASSERT_EQ(kind, DeviceKind::kController);
        }
        if (e.kind == EventKind::kSend) {
          ASSERT_EQ(kind, DeviceKind::kSubject);
        }
        if (u.assumptions.empty()) {
          ASSERT_TRUE(e.kind != EventKind::kIllegalTransfer && e.kind != EventKind::kIllegalUse);
        }
      }
  }
}

// Every policy filed by a Send is at least as restrictive as one of the
// owner's own policies.
TEST(ExecModelProperty, CollectionSoundness) {
  testing::Rng rng(33);
  int sends = 0;
  for (int k = 0; k < 100; ++k) {
    const auto [u, g] = testing::explored_random_universe(rng);
    for (const auto& st : g.states)
      for (const auto& [dev, entries] : st.rho)
        for (const auto& r : entries) {
          if (r.sender != u.item(r.item).owner) continue;
          ++sends;
          const auto& own = u.declared(r.sender);
          ASSERT_TRUE(std::any_of(own.begin(), own.end(),
                                  [&](const PilotPolicy& p) { return policy_subsumes(r.policy, p, u.hierarchies); }));
        }
  }
  EXPECT_GT(sends, 0);
}

// Only the owner has a value before anyone received the item; afterwards,
// every device holding a value for it also has it in its received set.
TEST(ExecModelProperty, ValuesTravelWithReceipts) {
  testing::Rng rng(34);
  for (int k = 0; k < 100; ++k) {
    const auto [u, g] = testing::explored_random_universe(rng);
    for (const auto& st : g.states)
      for (const auto& [key, v] : st.nu) {
        const auto& [dev, item] = key;
        if (dev == u.item(item).owner) continue;
        ASSERT_TRUE(st.holds(dev, item));
        ASSERT_EQ(v, *u.item(item).value);
      }
  }
}

}  // namespace
}  // namespace pilot
