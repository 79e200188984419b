#pragma once

// PILOT policies and their algebra: subsumption (is at least as restrictive
// as) and join (combination that is at least as restrictive as both sides).

#include <algorithm>
#include <compare>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "pilot/condition.hpp"
#include "pilot/error.hpp"
#include "pilot/hierarchy.hpp"
#include "pilot/timestamp.hpp"

namespace pilot {

using PurposeSet = std::set<Label>;

struct DataUsageRule {
  PurposeSet purposes;
  Timestamp retention;

  friend auto operator<=>(const DataUsageRule&, const DataUsageRule&) = default;
  friend bool operator==(const DataUsageRule&, const DataUsageRule&) = default;
};

struct DataCommunicationRule {
  Condition condition;
  Label entity;
  DataUsageRule dur;

  friend auto operator<=>(const DataCommunicationRule&, const DataCommunicationRule&) = default;
  friend bool operator==(const DataCommunicationRule&, const DataCommunicationRule&) = default;
};

struct PilotPolicy {
  Label datatype;
  DataCommunicationRule dcr;
  std::set<DataCommunicationRule> transfers;

  friend auto operator<=>(const PilotPolicy&, const PilotPolicy&) = default;
  friend bool operator==(const PilotPolicy&, const PilotPolicy&) = default;
};

// ---------------------------------------------------------------------------
// Well-formedness

inline void validate(const DataUsageRule& d, const Hierarchies& hs, bool allow_empty_purposes = false) {
  if (d.purposes.empty() && !allow_empty_purposes) {
    throw ValidationError("purposes-non-empty", "a data usage rule needs at least one purpose");
  }
  for (const auto& p : d.purposes) hs.purposes.require(p);
}

inline void validate(const DataCommunicationRule& r, const Hierarchies& hs,
                     bool allow_empty_purposes = false) {
  hs.entities.require(r.entity);
  validate(r.dur, hs, allow_empty_purposes);
}

inline void validate(const PilotPolicy& p, const Hierarchies& hs, bool allow_empty_purposes = false) {
  hs.datatypes.require(p.datatype);
  validate(p.dcr, hs, allow_empty_purposes);
  for (const auto& tr : p.transfers) validate(tr, hs, allow_empty_purposes);
}

// ---------------------------------------------------------------------------
// Subsumption

// d1 is at least as restrictive as d2: every purpose of d1 is covered by some
// purpose of d2, and d1 expires no later than d2.
inline bool dur_subsumes(const DataUsageRule& d1, const DataUsageRule& d2, const Hierarchy& purposes) {
  for (const auto& p : d2.purposes) purposes.require(p);
  for (const auto& p1 : d1.purposes) {
    purposes.require(p1);
    const bool covered = std::any_of(d2.purposes.begin(), d2.purposes.end(),
                                     [&](const Label& p2) { return purposes.leq(p1, p2); });
    if (!covered) return false;
  }
  return d1.retention <= d2.retention;
}

inline bool dcr_subsumes(const DataCommunicationRule& r1, const DataCommunicationRule& r2,
                         const Hierarchies& hs) {
  // Both label checks run before returning so unknown labels always surface.
  const bool entity_ok = hs.entities.leq(r1.entity, r2.entity);
  const bool dur_ok = dur_subsumes(r1.dur, r2.dur, hs.purposes);
  return entity_ok && dur_ok && entails(r1.condition, r2.condition);
}

inline bool policy_subsumes(const PilotPolicy& p1, const PilotPolicy& p2, const Hierarchies& hs) {
  if (!hs.datatypes.leq(p1.datatype, p2.datatype)) return false;
  if (!dcr_subsumes(p1.dcr, p2.dcr, hs)) return false;
  return std::all_of(p1.transfers.begin(), p1.transfers.end(), [&](const DataCommunicationRule& t1) {
    return std::any_of(p2.transfers.begin(), p2.transfers.end(),
                       [&](const DataCommunicationRule& t2) { return dcr_subsumes(t1, t2, hs); });
  });
}

// ---------------------------------------------------------------------------
// Join

struct JoinOptions {
  // Literal reading of the minimum on incomparable labels (returns the second
  // argument). Breaks privacy preservation; only for fidelity experiments.
  bool literal_min = false;
};

// Intersection that also keeps members of `p` lying strictly below some
// member of `q`. Not symmetric.
inline PurposeSet purpose_cap(const PurposeSet& p, const PurposeSet& q, const Hierarchy& purposes) {
  for (const auto& x : q) purposes.require(x);
  PurposeSet out;
  for (const auto& x : p) {
    purposes.require(x);
    if (q.count(x)) {
      out.insert(x);
      continue;
    }
    if (std::any_of(q.begin(), q.end(), [&](const Label& y) { return purposes.less(x, y); })) {
      out.insert(x);
    }
  }
  return out;
}

inline Label po_min(const Label& a, const Label& b, const Hierarchy& h, JoinOptions opts = {}) {
  if (h.leq(a, b)) return a;
  if (h.leq(b, a) || opts.literal_min) return b;
  throw IncomparableError(h.domain(), a, b);
}

inline DataUsageRule dur_join(const DataUsageRule& d1, const DataUsageRule& d2, const Hierarchy& purposes) {
  return {purpose_cap(d1.purposes, d2.purposes, purposes), std::min(d1.retention, d2.retention)};
}

inline DataCommunicationRule dcr_join(const DataCommunicationRule& r1, const DataCommunicationRule& r2,
                                      const Hierarchies& hs, JoinOptions opts = {}) {
  return {Condition::conj(r1.condition, r2.condition), po_min(r1.entity, r2.entity, hs.entities, opts),
          dur_join(r1.dur, r2.dur, hs.purposes)};
}

inline PilotPolicy policy_join(const PilotPolicy& p1, const PilotPolicy& p2, const Hierarchies& hs,
                               JoinOptions opts = {}) {
  PilotPolicy out{po_min(p1.datatype, p2.datatype, hs.datatypes, opts), dcr_join(p1.dcr, p2.dcr, hs, opts),
                  {}};
  for (const auto& t1 : p1.transfers)
    for (const auto& t2 : p2.transfers)
      if (dcr_subsumes(t1, t2, hs)) out.transfers.insert(dcr_join(t1, t2, hs, opts));
  return out;
}

}  // namespace pilot
