#pragma once

// Explicit-state exploration of every event interleaving, answering
// reachability questions with shortest witness traces.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pilot/error.hpp"
#include "pilot/exec_model.hpp"
#include "pilot/hierarchy.hpp"
#include "pilot/policy.hpp"

namespace pilot {

struct Query {
  enum class Kind { kCanReceive, kCanUse, kCanUseOtherThan };

  Kind kind = Kind::kCanReceive;
  Label entity;
  ItemId item;
  Label purpose;        // kCanUse
  PurposeSet purposes;  // kCanUseOtherThan: the reference set

  static Query can_receive(Label e, ItemId i) { return {Kind::kCanReceive, std::move(e), std::move(i), {}, {}}; }
  static Query can_use(Label e, ItemId i, Label pur) {
    return {Kind::kCanUse, std::move(e), std::move(i), std::move(pur), {}};
  }
  static Query can_use_other_than(Label e, ItemId i, PurposeSet ps) {
    return {Kind::kCanUseOtherThan, std::move(e), std::move(i), {}, std::move(ps)};
  }

  friend bool operator==(const Query&, const Query&) = default;
};

inline const char* to_string(Query::Kind k) {
  switch (k) {
    case Query::Kind::kCanReceive: return "can_receive";
    case Query::Kind::kCanUse: return "can_use";
    case Query::Kind::kCanUseOtherThan: return "can_use_other_than";
  }
  return "?";
}

struct Verdict {
  bool answer = false;
  std::vector<Event> witness;  // empty for "no" and for answers by ownership
  std::size_t states_explored = 0;
  bool by_ownership = false;
  std::optional<DeviceId> subject;  // device that receives or uses the item
  std::optional<Label> purpose;     // purpose of the witnessed use
  bool respected = true;            // false: the owner's policies do not license it

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct Transition {
  Event event;
  std::size_t target;
};

// States are numbered in breadth-first discovery order; state 0 is initial.
struct StateGraph {
  std::vector<SystemState> states;
  std::vector<std::vector<Transition>> edges;
  std::vector<std::optional<std::size_t>> parent;
  std::vector<std::optional<Event>> via;  // event from parent
  std::vector<std::size_t> depth;

  std::size_t size() const { return states.size(); }

  std::vector<Event> path_to(std::size_t s) const {
    std::vector<Event> out;
    while (parent[s]) {
      out.push_back(*via[s]);
      s = *parent[s];
    }
    std::reverse(out.begin(), out.end());
    return out;
  }
};

struct ExploreOptions {
  std::size_t max_states = 1'000'000;
};

inline StateGraph explore(const Universe& u, ExploreOptions opts = {}) {
  StateGraph g;
  std::map<SystemState, std::size_t> index;
  auto add = [&](SystemState st, std::optional<std::size_t> parent, std::optional<Event> via) {
    auto [it, inserted] = index.emplace(std::move(st), g.states.size());
    if (!inserted) return it->second;
    if (g.states.size() >= opts.max_states) throw BudgetExceededError(opts.max_states);
    g.states.push_back(it->first);
    g.edges.emplace_back();
    g.depth.push_back(parent ? g.depth[*parent] + 1 : 0);
    g.parent.push_back(parent);
    g.via.push_back(std::move(via));
    return it->second;
  };
  add(initial_state(u), std::nullopt, std::nullopt);
  for (std::size_t s = 0; s < g.states.size(); ++s) {
    for (auto& e : enumerate_events(u, g.states[s])) {
      SystemState next = apply(u, e, g.states[s]);
      const std::size_t t = add(std::move(next), s, e);
      g.edges[s].push_back({std::move(e), t});
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Licensing by the owner's own policies

inline std::vector<const DataCommunicationRule*> owner_rules(const Universe& u, const ItemId& i) {
  const auto& item = u.item(i);
  std::vector<const DataCommunicationRule*> out;
  for (const auto& p : u.declared(item.owner)) {
    if (!u.hierarchies.datatypes.leq(item.datatype, p.datatype)) continue;
    out.push_back(&p.dcr);
    for (const auto& tr : p.transfers) out.push_back(&tr);
  }
  return out;
}

inline bool licensed_receive(const Universe& u, const DeviceId& dev, const ItemId& i) {
  const Label& ent = u.device(dev).entity;
  if (u.item(i).owner == dev) return true;
  for (const auto* r : owner_rules(u, i))
    if (u.hierarchies.entities.leq(ent, r->entity)) return true;
  return false;
}

inline bool licensed_use(const Universe& u, const DeviceId& dev, const ItemId& i, const Label& pur) {
  const Label& ent = u.device(dev).entity;
  for (const auto* r : owner_rules(u, i))
    if (u.hierarchies.entities.leq(ent, r->entity) &&
        purpose_allowed(u.hierarchies.purposes, pur, r->dur.purposes))
      return true;
  return false;
}

// ---------------------------------------------------------------------------
// Queries

inline void check_query(const Universe& u, const Query& q) {
  u.hierarchies.entities.require(q.entity);
  u.item(q.item);
  if (q.kind == Query::Kind::kCanUse) u.hierarchies.purposes.require(q.purpose);
  for (const auto& p : q.purposes) u.hierarchies.purposes.require(p);
}

inline bool is_use(const Event& e) { return e.kind == EventKind::kUse || e.kind == EventKind::kIllegalUse; }

// Purposes a use must have to count for the query.
inline bool purpose_matches(const Universe& u, const Query& q, const Label& pur) {
  const auto& P = u.hierarchies.purposes;
  if (q.kind == Query::Kind::kCanUse) return pur == q.purpose;
  return std::none_of(q.purposes.begin(), q.purposes.end(), [&](const Label& p) { return P.leq(pur, p); });
}

inline bool use_matches(const Universe& u, const Query& q, const Event& e) {
  return is_use(e) && e.item == q.item && u.hierarchies.entities.leq(u.device(e.sender).entity, q.entity) &&
         purpose_matches(u, q, e.purpose);
}

inline std::optional<DeviceId> receiver_in(const Universe& u, const Query& q, const SystemState& st) {
  for (const auto& d : u.devices)
    if (u.hierarchies.entities.leq(d.entity, q.entity) && st.holds(d.id, q.item)) return d.id;
  return std::nullopt;
}

// A yes answer is not respected when some matching behaviour is not licensed
// by the owner's policies; the witness then shows the shortest such run.
inline Verdict answer(const Query& q, const StateGraph& g, const Universe& u) {
  check_query(u, q);
  Verdict v;
  v.states_explored = g.size();
  if (q.kind == Query::Kind::kCanReceive) {
    const auto& owner = u.device(u.item(q.item).owner);
    if (u.hierarchies.entities.leq(owner.entity, q.entity)) {
      v.answer = true;
      v.by_ownership = true;
      v.subject = owner.id;
      return v;
    }
  }
  struct Hit {
    std::size_t state;
    DeviceId subject;
    std::optional<Event> use;
  };
  std::optional<Hit> first;
  std::optional<Hit> violation;
  for (std::size_t s = 0; s < g.size() && !violation; ++s) {
    if (q.kind == Query::Kind::kCanReceive) {
      for (const auto& d : u.devices) {
        if (!u.hierarchies.entities.leq(d.entity, q.entity) || !g.states[s].holds(d.id, q.item)) continue;
        Hit h{s, d.id, std::nullopt};
        if (!first) first = h;
        if (!licensed_receive(u, d.id, q.item)) {
          violation = h;
          break;
        }
      }
      continue;
    }
    for (const auto& t : g.edges[s]) {
      if (!use_matches(u, q, t.event)) continue;
      Hit h{s, t.event.sender, t.event};
      if (!first) first = h;
      if (!licensed_use(u, t.event.sender, q.item, t.event.purpose)) {
        violation = h;
        break;
      }
    }
  }
  const auto& hit = violation ? violation : first;
  if (!hit) return v;
  v.answer = true;
  v.respected = !violation;
  v.subject = hit->subject;
  v.witness = g.path_to(hit->state);
  if (hit->use) {
    v.purpose = hit->use->purpose;
    v.witness.push_back(*hit->use);
  }
  return v;
}

inline Verdict verify(const Universe& u, const Query& q, ExploreOptions opts = {}) {
  check_query(u, q);
  return answer(q, explore(u, opts), u);
}

// Replays the witness from the initial state; every event must be enabled
// and the end of the trace must satisfy the query.
inline bool witness_valid(const Universe& u, const Query& q, const Verdict& v) {
  if (!v.answer) return v.witness.empty();
  if (v.by_ownership) return v.witness.empty();
  if (v.witness.empty()) return false;
  SystemState st = initial_state(u);
  try {
    for (const auto& e : v.witness) st = apply(u, e, st);
  } catch (const NotEnabledError&) {
    return false;
  }
  if (q.kind == Query::Kind::kCanReceive) return receiver_in(u, q, st).has_value();
  return use_matches(u, q, v.witness.back());
}

// ---------------------------------------------------------------------------
// Variant matrix

struct PolicyVariant {
  std::string name;
  std::map<DeviceId, std::vector<PilotPolicy>> policies;  // replaces the listed devices' policies

  friend bool operator==(const PolicyVariant&, const PolicyVariant&) = default;
};

struct AssumptionVariant {
  std::string name;
  std::vector<std::string> assume;  // assumption ids

  friend bool operator==(const AssumptionVariant&, const AssumptionVariant&) = default;
};

struct NamedQuery {
  std::string name;
  std::string text;
  Query query;

  friend bool operator==(const NamedQuery&, const NamedQuery&) = default;
};

struct MatrixColumn {
  std::string assumption_variant;
  std::string policy_variant;
  std::size_t states = 0;
};

struct AnswerMatrix {
  std::vector<MatrixColumn> columns;
  std::vector<NamedQuery> rows;
  std::vector<std::vector<Verdict>> cells;  // [row][column]
};

// `base.assumptions` is the pool the variants select from.
inline Universe with_variant(const Universe& base, const PolicyVariant* pv, const std::vector<std::string>& assume) {
  Universe u = base;
  if (pv)
    for (const auto& [dev, ps] : pv->policies) {
      base.device(dev);
      u.policies[dev] = ps;
    }
  u.assumptions.clear();
  for (const auto& id : assume) {
    auto it = std::find_if(base.assumptions.begin(), base.assumptions.end(),
                           [&](const RiskAssumption& a) { return a.id == id; });
    if (it == base.assumptions.end()) throw ValidationError("assumption-exists", "unknown assumption '" + id + "'");
    if (std::none_of(u.assumptions.begin(), u.assumptions.end(),
                     [&](const RiskAssumption& a) { return a.id == id; }))
      u.assumptions.push_back(*it);
  }
  return u;
}

// Columns are ordered assumption variant first, then policy variant.
inline AnswerMatrix answer_matrix(const Universe& base, const std::vector<PolicyVariant>& policies,
                                  const std::vector<AssumptionVariant>& assumptions,
                                  const std::vector<NamedQuery>& questions, ExploreOptions opts = {}) {
  AnswerMatrix m;
  m.rows = questions;
  m.cells.assign(questions.size(), {});
  for (const auto& av : assumptions) {
    for (const auto& pv : policies) {
      const Universe u = with_variant(base, &pv, av.assume);
      const StateGraph g = explore(u, opts);
      m.columns.push_back({av.name, pv.name, g.size()});
      for (std::size_t r = 0; r < questions.size(); ++r) m.cells[r].push_back(answer(questions[r].query, g, u));
    }
  }
  return m;
}

}  // namespace pilot
