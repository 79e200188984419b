#pragma once

// Abstract execution model: devices exchange data items under PILOT
// policies. A state is the triple (nu, pi, rho):
//   nu   values held by each device,
//   pi   policies known to each device, tagged with the device they came from,
//   rho  items received by each device, with sender and governing policy.

#include <algorithm>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pilot/condition.hpp"
#include "pilot/error.hpp"
#include "pilot/hierarchy.hpp"
#include "pilot/policy.hpp"
#include "pilot/timestamp.hpp"

namespace pilot {

enum class DeviceKind { kSubject, kController };  // DS, DC

inline const char* to_string(DeviceKind k) { return k == DeviceKind::kSubject ? "DS" : "DC"; }

struct Device {
  DeviceId id;
  Label entity;
  DeviceKind kind = DeviceKind::kController;

  friend bool operator==(const Device&, const Device&) = default;
};

struct DataItem {
  ItemId id;
  Label datatype;
  DeviceId owner;
  MaybeValue value;

  friend bool operator==(const DataItem&, const DataItem&) = default;
};

struct PolicyEntry {
  DeviceId origin;
  PilotPolicy policy;

  friend auto operator<=>(const PolicyEntry&, const PolicyEntry&) = default;
  friend bool operator==(const PolicyEntry&, const PolicyEntry&) = default;
};

struct ReceivedEntry {
  DeviceId sender;
  ItemId item;
  PilotPolicy policy;

  friend auto operator<=>(const ReceivedEntry&, const ReceivedEntry&) = default;
  friend bool operator==(const ReceivedEntry&, const ReceivedEntry&) = default;
};

struct SystemState {
  Valuation nu;
  std::map<DeviceId, std::set<PolicyEntry>> pi;
  std::map<DeviceId, std::set<ReceivedEntry>> rho;

  friend auto operator<=>(const SystemState&, const SystemState&) = default;
  friend bool operator==(const SystemState&, const SystemState&) = default;

  const std::set<ReceivedEntry>& received(const DeviceId& d) const {
    static const std::set<ReceivedEntry> none;
    auto it = rho.find(d);
    return it == rho.end() ? none : it->second;
  }
  const std::set<PolicyEntry>& policies(const DeviceId& d) const {
    static const std::set<PolicyEntry> none;
    auto it = pi.find(d);
    return it == pi.end() ? none : it->second;
  }
  bool holds(const DeviceId& d, const ItemId& i) const {
    const auto& r = received(d);
    return std::any_of(r.begin(), r.end(), [&](const ReceivedEntry& e) { return e.item == i; });
  }
};

// ---------------------------------------------------------------------------
// Risk assumptions

struct IllegalTransferCapability {
  Label from_entity;
  Label to_entity;
  std::optional<Label> datatype;

  friend bool operator==(const IllegalTransferCapability&, const IllegalTransferCapability&) = default;
};

struct IllegalUseInterest {
  Label entity;
  Label purpose;
  std::optional<Label> datatype;

  friend bool operator==(const IllegalUseInterest&, const IllegalUseInterest&) = default;
};

struct RiskAssumption {
  std::string id;
  std::variant<IllegalTransferCapability, IllegalUseInterest> capability;
  std::string description;

  friend bool operator==(const RiskAssumption&, const RiskAssumption&) = default;
};

struct ClockPolicy {
  Timestamp now;

  friend bool operator==(const ClockPolicy&, const ClockPolicy&) = default;
};

// Everything fixed for one analysis run.
struct Universe {
  Hierarchies hierarchies;
  std::vector<Device> devices;
  std::vector<DataItem> items;
  std::map<DeviceId, std::vector<PilotPolicy>> policies;  // locally declared
  std::vector<RiskAssumption> assumptions;                // the active ones
  ClockPolicy clock;

  const Device& device(const DeviceId& id) const {
    for (const auto& d : devices)
      if (d.id == id) return d;
    throw ValidationError("device-exists", "unknown device '" + id + "'");
  }
  const DataItem& item(const ItemId& id) const {
    for (const auto& i : items)
      if (i.id == id) return i;
    throw ValidationError("item-exists", "unknown item '" + id + "'");
  }
  const std::vector<PilotPolicy>& declared(const DeviceId& d) const {
    static const std::vector<PilotPolicy> none;
    auto it = policies.find(d);
    return it == policies.end() ? none : it->second;
  }
};

inline SystemState initial_state(const Universe& u) {
  SystemState st;
  for (const auto& i : u.items)
    if (i.value) st.nu[{i.owner, i.id}] = *i.value;
  for (const auto& [dev, ps] : u.policies)
    for (const auto& p : ps) st.pi[dev].insert({dev, p});
  return st;
}

// ---------------------------------------------------------------------------
// Events

enum class EventKind { kRequest, kSend, kTransfer, kUse, kIllegalTransfer, kIllegalUse };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kRequest: return "request";
    case EventKind::kSend: return "send";
    case EventKind::kTransfer: return "transfer";
    case EventKind::kUse: return "use";
    case EventKind::kIllegalTransfer: return "illegal_transfer";
    case EventKind::kIllegalUse: return "illegal_use";
  }
  return "?";
}

inline std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::kRequest, EventKind::kSend, EventKind::kTransfer, EventKind::kUse,
                 EventKind::kIllegalTransfer, EventKind::kIllegalUse})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

// Field use per kind:
//   request            sender asks receiver for `datatype`, offering `policy`
//   send, transfer     sender passes `item` to receiver under `policy` (the receiver's)
//   illegal_transfer   sender passes `item` to receiver, ignoring policies
//   use, illegal_use   `sender` uses `item` for `purpose`
struct Event {
  EventKind kind;
  DeviceId sender;
  DeviceId receiver;
  ItemId item;
  Label datatype;
  Label purpose;
  std::optional<PilotPolicy> policy;
  Timestamp time;

  friend auto operator<=>(const Event&, const Event&) = default;
  friend bool operator==(const Event&, const Event&) = default;
};

inline Event request_event(DeviceId sndr, DeviceId rcv, Label datatype, PilotPolicy p, Timestamp t) {
  return {EventKind::kRequest, std::move(sndr), std::move(rcv), {}, std::move(datatype), {}, std::move(p), t};
}
inline Event send_event(DeviceId sndr, DeviceId rcv, ItemId i, PilotPolicy p_rcv, Timestamp t) {
  return {EventKind::kSend, std::move(sndr), std::move(rcv), std::move(i), {}, {}, std::move(p_rcv), t};
}
inline Event transfer_event(DeviceId sndr, DeviceId rcv, ItemId i, PilotPolicy p_rcv, Timestamp t) {
  return {EventKind::kTransfer, std::move(sndr), std::move(rcv), std::move(i), {}, {}, std::move(p_rcv), t};
}
inline Event use_event(DeviceId dev, ItemId i, Label pur, Timestamp t) {
  return {EventKind::kUse, std::move(dev), {}, std::move(i), {}, std::move(pur), std::nullopt, t};
}
inline Event illegal_transfer_event(DeviceId sndr, DeviceId rcv, ItemId i, Timestamp t) {
  return {EventKind::kIllegalTransfer, std::move(sndr), std::move(rcv), std::move(i), {}, {}, std::nullopt, t};
}
inline Event illegal_use_event(DeviceId dev, ItemId i, Label pur, Timestamp t) {
  return {EventKind::kIllegalUse, std::move(dev), {}, std::move(i), {}, std::move(pur), std::nullopt, t};
}

inline std::string notation(const Event& e) {
  switch (e.kind) {
    case EventKind::kRequest:
      return "request(" + e.sender + ", " + e.receiver + ", " + e.datatype + ")";
    case EventKind::kSend:
    case EventKind::kTransfer:
    case EventKind::kIllegalTransfer:
      return std::string(to_string(e.kind)) + "(" + e.sender + ", " + e.receiver + ", " + e.item + ")";
    case EventKind::kUse:
    case EventKind::kIllegalUse:
      return std::string(to_string(e.kind)) + "(" + e.sender + ", " + e.item + ", " + e.purpose + ")";
  }
  return "?";
}

inline std::string describe(const Event& e) {
  switch (e.kind) {
    case EventKind::kRequest:
      return e.sender + " requests " + e.datatype + " from " + e.receiver;
    case EventKind::kSend: return e.sender + " sends " + e.item + " to " + e.receiver;
    case EventKind::kTransfer: return e.sender + " transfers " + e.item + " to " + e.receiver;
    case EventKind::kUse: return e.sender + " uses " + e.item + " for " + e.purpose;
    case EventKind::kIllegalTransfer:
      return e.sender + " illegally transfers " + e.item + " to " + e.receiver;
    case EventKind::kIllegalUse:
      return e.sender + " illegally uses " + e.item + " for " + e.purpose;
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Enabledness

inline bool condition_holds(const Condition& c, const SystemState& st, const DeviceId& at) {
  return evaluate(c, st.nu, at) == TruthValue::kTrue;
}

// activePolicy(p, send(sndr, rcv, i), st)
inline bool active_policy(const Universe& u, const PilotPolicy& p, const DeviceId& sndr, const DeviceId& rcv,
                          const ItemId& i, const SystemState& st) {
  const auto& hs = u.hierarchies;
  return hs.datatypes.leq(u.item(i).datatype, p.datatype) && condition_holds(p.dcr.condition, st, sndr) &&
         u.clock.now < p.dcr.dur.retention && hs.entities.leq(u.device(rcv).entity, p.dcr.entity);
}

// activeTransfer(tr, p, transfer(sndr, rcv, i), st)
inline bool active_transfer(const Universe& u, const DataCommunicationRule& tr, const PilotPolicy& p,
                            const DeviceId& sndr, const DeviceId& rcv, const ItemId& i,
                            const SystemState& st) {
  const auto& hs = u.hierarchies;
  return hs.datatypes.leq(u.item(i).datatype, p.datatype) && condition_holds(tr.condition, st, sndr) &&
         u.clock.now < tr.dur.retention && hs.entities.leq(u.device(rcv).entity, tr.entity) &&
         u.clock.now < p.dcr.dur.retention;
}

inline bool is_controller(const Universe& u, const DeviceId& d) {
  return u.device(d).kind == DeviceKind::kController;
}

inline bool purpose_allowed(const Hierarchy& purposes, const Label& pur, const PurposeSet& allowed) {
  return std::any_of(allowed.begin(), allowed.end(), [&](const Label& q) { return purposes.leq(pur, q); });
}

inline bool datatype_filter(const Universe& u, const std::optional<Label>& filter, const ItemId& i) {
  return !filter || u.hierarchies.datatypes.leq(u.item(i).datatype, *filter);
}

inline std::vector<const IllegalTransferCapability*> transfer_capabilities(const Universe& u) {
  std::vector<const IllegalTransferCapability*> out;
  for (const auto& a : u.assumptions)
    if (auto* c = std::get_if<IllegalTransferCapability>(&a.capability)) out.push_back(c);
  return out;
}

inline std::vector<const IllegalUseInterest*> use_interests(const Universe& u) {
  std::vector<const IllegalUseInterest*> out;
  for (const auto& a : u.assumptions)
    if (auto* c = std::get_if<IllegalUseInterest>(&a.capability)) out.push_back(c);
  return out;
}

// Policy the receiver of an illegal transfer files the item under: its own
// declared policy for the datatype if it has one, otherwise a marker that
// grants no purpose and no transfer.
inline PilotPolicy shadow_policy(const Universe& u, const DeviceId& rcv, const ItemId& i) {
  const Label& t = u.item(i).datatype;
  for (const auto& p : u.declared(rcv))
    if (u.hierarchies.datatypes.leq(t, p.datatype)) return p;
  return PilotPolicy{t, {Condition::tt(), u.device(rcv).entity, {{}, Timestamp{0}}}, {}};
}

inline bool enabled(const Universe& u, const Event& e, const SystemState& st) {
  const auto& hs = u.hierarchies;
  switch (e.kind) {
    case EventKind::kRequest: {
      if (!e.policy || e.sender == e.receiver || !is_controller(u, e.sender)) return false;
      u.device(e.receiver);
      if (e.policy->datatype != e.datatype) return false;
      const auto& own = u.declared(e.sender);
      return std::find(own.begin(), own.end(), *e.policy) != own.end();
    }
    case EventKind::kSend: {
      if (!e.policy || e.sender == e.receiver) return false;
      const auto& item = u.item(e.item);
      if (item.owner != e.sender || u.device(e.sender).kind != DeviceKind::kSubject) return false;
      if (!is_controller(u, e.receiver)) return false;
      const auto& known = st.policies(e.sender);
      if (!known.count({e.receiver, *e.policy})) return false;
      if (!active_policy(u, *e.policy, e.sender, e.receiver, e.item, st)) return false;
      return std::any_of(known.begin(), known.end(), [&](const PolicyEntry& own) {
        return own.origin == e.sender && active_policy(u, own.policy, e.sender, e.receiver, e.item, st) &&
               policy_subsumes(*e.policy, own.policy, hs);
      });
    }
    case EventKind::kTransfer: {
      if (!e.policy || e.sender == e.receiver) return false;
      if (!is_controller(u, e.sender) || !is_controller(u, e.receiver)) return false;
      if (!st.policies(e.sender).count({e.receiver, *e.policy})) return false;
      if (!active_policy(u, *e.policy, e.sender, e.receiver, e.item, st)) return false;
      for (const auto& r : st.received(e.sender)) {
        if (r.item != e.item) continue;
        for (const auto& tr : r.policy.transfers) {
          if (!active_transfer(u, tr, r.policy, e.sender, e.receiver, e.item, st)) continue;
          const PilotPolicy p_tr{r.policy.datatype, tr, r.policy.transfers};
          if (policy_subsumes(*e.policy, p_tr, hs)) return true;
        }
      }
      return false;
    }
    case EventKind::kUse: {
      if (!is_controller(u, e.sender)) return false;
      hs.purposes.require(e.purpose);
      const auto& r = st.received(e.sender);
      return std::any_of(r.begin(), r.end(), [&](const ReceivedEntry& x) {
        return x.item == e.item && purpose_allowed(hs.purposes, e.purpose, x.policy.dcr.dur.purposes) &&
               u.clock.now < x.policy.dcr.dur.retention;
      });
    }
    case EventKind::kIllegalTransfer: {
      if (e.sender == e.receiver || !is_controller(u, e.receiver)) return false;
      if (!st.holds(e.sender, e.item)) return false;
      const Label& from = u.device(e.sender).entity;
      const Label& to = u.device(e.receiver).entity;
      for (const auto* c : transfer_capabilities(u))
        if (hs.entities.leq(from, c->from_entity) && hs.entities.leq(to, c->to_entity) &&
            datatype_filter(u, c->datatype, e.item))
          return true;
      return false;
    }
    case EventKind::kIllegalUse: {
      if (!st.holds(e.sender, e.item)) return false;
      hs.purposes.require(e.purpose);
      const Label& ent = u.device(e.sender).entity;
      for (const auto* c : use_interests(u))
        if (hs.entities.leq(ent, c->entity) && hs.purposes.leq(e.purpose, c->purpose) &&
            datatype_filter(u, c->datatype, e.item))
          return true;
      return false;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Transitions

inline SystemState apply(const Universe& u, const Event& e, const SystemState& st) {
  if (!enabled(u, e, st)) throw NotEnabledError(notation(e));
  SystemState next = st;
  auto copy_value = [&] {
    auto it = st.nu.find({e.sender, e.item});
    if (it != st.nu.end()) next.nu[{e.receiver, e.item}] = it->second;
  };
  switch (e.kind) {
    case EventKind::kRequest: next.pi[e.receiver].insert({e.sender, *e.policy}); break;
    case EventKind::kSend:
    case EventKind::kTransfer:
      next.rho[e.receiver].insert({e.sender, e.item, *e.policy});
      copy_value();
      break;
    case EventKind::kIllegalTransfer:
      next.rho[e.receiver].insert({e.sender, e.item, shadow_policy(u, e.receiver, e.item)});
      copy_value();
      break;
    case EventKind::kUse:
    case EventKind::kIllegalUse: break;
  }
  return next;
}

// All enabled events in `st`, in the fixed order used for deterministic
// exploration (Event's ordering: kind first, then ids).
inline std::vector<Event> enumerate_events(const Universe& u, const SystemState& st) {
  std::vector<Event> out;
  const Timestamp now = u.clock.now;
  auto consider = [&](Event e) {
    if (enabled(u, e, st)) out.push_back(std::move(e));
  };

  for (const auto& s : u.devices) {
    if (s.kind != DeviceKind::kController) continue;
    for (const auto& r : u.devices) {
      if (r.id == s.id) continue;
      for (const auto& p : u.declared(s.id)) consider(request_event(s.id, r.id, p.datatype, p, now));
    }
  }

  for (const auto& s : u.devices) {
    const auto& known = st.policies(s.id);
    for (const auto& entry : known) {
      if (entry.origin == s.id) continue;
      for (const auto& i : u.items) {
        if (s.kind == DeviceKind::kSubject && i.owner == s.id) {
          consider(send_event(s.id, entry.origin, i.id, entry.policy, now));
        }
        if (s.kind == DeviceKind::kController && st.holds(s.id, i.id)) {
          consider(transfer_event(s.id, entry.origin, i.id, entry.policy, now));
        }
      }
    }
  }

  for (const auto& d : u.devices) {
    for (const auto& i : u.items) {
      if (!st.holds(d.id, i.id)) continue;
      for (const auto& pur : u.hierarchies.purposes.labels()) consider(use_event(d.id, i.id, pur, now));
      for (const auto& r : u.devices) consider(illegal_transfer_event(d.id, r.id, i.id, now));
      for (const auto& pur : u.hierarchies.purposes.labels())
        consider(illegal_use_event(d.id, i.id, pur, now));
    }
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace pilot
