#pragma once

// The parking case study written out structurally, independent of the parser
// and the scenario loader.

#include <string>

#include "pilot/condition.hpp"
#include "pilot/exec_model.hpp"
#include "pilot/hierarchy.hpp"
#include "pilot/policy.hpp"

namespace pilot::testing {

inline std::string data_path(const std::string& name) { return std::string(PILOT_DATA_DIR) + "/" + name; }

inline Hierarchies anpr_hierarchies() {
  return {Hierarchy("entity", {"Alice", "Parket", "ParketWW", "CarInsure"}),
          Hierarchy("datatype", {"number_plate"}), Hierarchy("purpose", {"commercial_offers", "profiling"})};
}

inline Timestamp date(int d, unsigned m, int y) { return *Timestamp::from_date(y, m, static_cast<unsigned>(d)); }

// Parket's policy, with the transfer to ParketWW.
inline PilotPolicy parket_policy() {
  return {"number_plate",
          {Condition::tt(), "Parket", {{"commercial_offers"}, date(21, 3, 2019)}},
          {{Condition::tt(), "ParketWW", {{"commercial_offers"}, date(26, 4, 2019)}}}};
}

// Alice's policy: collection only in Lyon, no transfer.
inline PilotPolicy alice_policy() {
  return {"number_plate",
          {Condition::atom(Predicate::kEq, Term::item("car_location"), Term::constant(Value{std::string("Lyon")})),
           "Parket",
           {{"commercial_offers"}, date(21, 3, 2019)}},
          {}};
}

inline PilotPolicy p_trans() { return parket_policy(); }

inline PilotPolicy p_no_trans() {
  return {"number_plate", {Condition::tt(), "Parket", {{"commercial_offers"}, date(21, 3, 2019)}}, {}};
}

inline PilotPolicy p_parketww() {
  return {"number_plate", {Condition::tt(), "ParketWW", {{"commercial_offers"}, date(26, 4, 2019)}}, {}};
}

inline Universe anpr_universe(const PilotPolicy& alice, const PilotPolicy& parket, bool misbehavior) {
  Universe u;
  u.hierarchies = anpr_hierarchies();
  u.devices = {{"Alice", "Alice", DeviceKind::kSubject},
               {"CarInsure", "CarInsure", DeviceKind::kController},
               {"Parket", "Parket", DeviceKind::kController},
               {"ParketWW", "ParketWW", DeviceKind::kController}};
  u.items = {{"plate_Alice", "number_plate", "Alice", Value{std::string("GD-042-PR")}}};
  u.policies = {{"Alice", {alice}}, {"Parket", {parket}}, {"ParketWW", {p_parketww()}}};
  if (misbehavior) {
    u.assumptions = {{"ww_leaks_to_carinsure", IllegalTransferCapability{"ParketWW", "CarInsure", std::nullopt}, ""},
                     {"carinsure_profiles", IllegalUseInterest{"CarInsure", "profiling", std::nullopt}, ""}};
  }
  u.clock.now = date(1, 3, 2019);
  return u;
}

}  // namespace pilot::testing
