#pragma once

// Scenario files (*.scenario.json), analysis records (*.record.json) and the
// directory store holding them.
//
// Serialization is canonical: object keys sorted, set-like arrays sorted and
// deduplicated, so equal values always produce identical bytes.

#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pilot/condition.hpp"
#include "pilot/error.hpp"
#include "pilot/exec_model.hpp"
#include "pilot/hierarchy.hpp"
#include "pilot/policy.hpp"
#include "pilot/policy_text.hpp"
#include "pilot/risk_analyzer.hpp"

namespace pilot {

using json = nlohmann::json;

inline constexpr const char* kEngineVersion = "pilot 0.1.0";

struct Scenario {
  std::string id;
  Hierarchies hierarchies;
  std::vector<Device> devices;                            // sorted by id
  std::vector<DataItem> items;                            // sorted by id
  std::map<DeviceId, std::vector<PilotPolicy>> policies;  // each list sorted, no duplicates
  std::vector<RiskAssumption> assumptions;                // sorted by id
  Timestamp now;
  std::vector<NamedQuery> questions;
  std::vector<PolicyVariant> policy_variants;
  std::vector<AssumptionVariant> assumption_variants;

  friend bool operator==(const Scenario&, const Scenario&) = default;

  // All assumptions are in the pool; select with `with_variant`.
  Universe universe() const {
    return Universe{hierarchies, devices, items, policies, assumptions, ClockPolicy{now}};
  }

  const NamedQuery& question(const std::string& name) const {
    for (const auto& q : questions)
      if (q.name == name) return q;
    throw ValidationError("question-exists", "unknown question '" + name + "'");
  }
  const PolicyVariant& policy_variant(const std::string& name) const {
    for (const auto& v : policy_variants)
      if (v.name == name) return v;
    throw ValidationError("variant-exists", "unknown policy variant '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

// Path-qualified access so errors name the offending entry.
inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ValidationError("scenario-format", path + " must be an object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError("scenario-format", path + "." + key + " is required");
  return *it;
}

inline std::string str(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError("scenario-format", path + " must be a string");
  return j.get<std::string>();
}

inline std::string str_field(const json& j, const std::string& key, const std::string& path) {
  return str(field(j, key, path), path + "." + key);
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("scenario-format", path + " must be an array");
  return j;
}

inline std::optional<std::string> opt_str(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ValidationError("scenario-format", path + " must be an object");
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return str(*it, path + "." + key);
}

inline Timestamp date(const json& j, const std::string& path) {
  auto t = Timestamp::try_parse(str(j, path));
  if (!t) throw ValidationError("invalid-date", path + " must be a date DD/MM/YYYY");
  return *t;
}

inline std::string at(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

}  // namespace detail

inline json value_to_json(const MaybeValue& v) {
  if (!v) return nullptr;
  if (auto* i = std::get_if<std::int64_t>(&*v)) return *i;
  if (auto* t = std::get_if<Timestamp>(&*v)) return json{{"date", t->to_string()}};
  return std::get<std::string>(*v);
}

inline MaybeValue value_from_json(const json& j, const std::string& path) {
  if (j.is_null()) return std::nullopt;
  if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
  if (j.is_string()) return Value{j.get<std::string>()};
  if (j.is_object() && j.size() == 1 && j.contains("date")) return Value{detail::date(j["date"], path + ".date")};
  throw ValidationError("scenario-format", path + " must be an integer, a string, {\"date\": ...} or null");
}

inline json hierarchy_to_json(const Hierarchy& h) {
  json edges = json::array();
  for (const auto& [c, p] : h.edges()) edges.push_back({c, p});
  return {{"labels", h.labels()}, {"edges", edges}};
}

inline Hierarchy hierarchy_from_json(const std::string& domain, const json& j, const std::string& path) {
  std::set<Label> labels;
  const auto& ls = detail::array(detail::field(j, "labels", path), path + ".labels");
  for (std::size_t k = 0; k < ls.size(); ++k) labels.insert(detail::str(ls[k], detail::at(path + ".labels", k)));
  std::set<Edge> edges;
  if (j.contains("edges")) {
    const auto& es = detail::array(j["edges"], path + ".edges");
    for (std::size_t k = 0; k < es.size(); ++k) {
      const auto p = detail::at(path + ".edges", k);
      if (!es[k].is_array() || es[k].size() != 2)
        throw ValidationError("scenario-format", p + " must be a [child, parent] pair");
      edges.insert({detail::str(es[k][0], p + "[0]"), detail::str(es[k][1], p + "[1]")});
    }
  }
  return Hierarchy(domain, std::move(labels), std::move(edges));
}

inline json hierarchies_to_json(const Hierarchies& hs) {
  return {{"entities", hierarchy_to_json(hs.entities)},
          {"datatypes", hierarchy_to_json(hs.datatypes)},
          {"purposes", hierarchy_to_json(hs.purposes)}};
}

inline Hierarchies hierarchies_from_json(const json& j, const std::string& path) {
  return {hierarchy_from_json("entity", detail::field(j, "entities", path), path + ".entities"),
          hierarchy_from_json("datatype", detail::field(j, "datatypes", path), path + ".datatypes"),
          hierarchy_from_json("purpose", detail::field(j, "purposes", path), path + ".purposes")};
}

inline json rule_to_json(const DataCommunicationRule& r) {
  return {{"condition", render_condition(r.condition)},
          {"entity", r.entity},
          {"purposes", r.dur.purposes},
          {"retention", r.dur.retention.to_string()}};
}

inline json policy_to_json(const PilotPolicy& p) {
  json trs = json::array();
  for (const auto& t : p.transfers) trs.push_back(rule_to_json(t));
  return {{"datatype", p.datatype}, {"dcr", rule_to_json(p.dcr)}, {"transfers", trs}};
}

inline Condition condition_from_json(const json& j, const std::string& path) {
  if (j.is_null()) return Condition::tt();
  try {
    return parse_condition(detail::str(j, path));
  } catch (const SyntaxError& e) {
    throw SyntaxError(path + ": " + e.message(), e.span());
  }
}

inline DataCommunicationRule rule_from_json(const json& j, const std::string& path) {
  DataCommunicationRule r;
  r.condition = j.is_object() && j.contains("condition") ? condition_from_json(j["condition"], path + ".condition")
                                                         : Condition::tt();
  r.entity = detail::str_field(j, "entity", path);
  const auto& ps = detail::array(detail::field(j, "purposes", path), path + ".purposes");
  for (std::size_t k = 0; k < ps.size(); ++k) r.dur.purposes.insert(detail::str(ps[k], detail::at(path + ".purposes", k)));
  r.dur.retention = detail::date(detail::field(j, "retention", path), path + ".retention");
  return r;
}

// Structured form, or {"text": "<policy sentence>"}. Labels are checked
// against `hs`; with `allow_empty_purposes` join results are accepted.
inline PilotPolicy policy_from_json(const json& j, const Hierarchies& hs, const std::string& path,
                                    bool allow_empty_purposes = false) {
  PilotPolicy p;
  if (j.is_string() || (j.is_object() && j.contains("text"))) {
    const std::string src = j.is_string() ? j.get<std::string>() : detail::str(j["text"], path + ".text");
    try {
      p = parse_policy(src, hs);
    } catch (const SyntaxError& e) {
      throw SyntaxError(path + ": " + e.message(), e.span());
    }
  } else {
    p.datatype = detail::str_field(j, "datatype", path);
    p.dcr = rule_from_json(detail::field(j, "dcr", path), path + ".dcr");
    if (j.contains("transfers")) {
      const auto& ts = detail::array(j["transfers"], path + ".transfers");
      for (std::size_t k = 0; k < ts.size(); ++k)
        p.transfers.insert(rule_from_json(ts[k], detail::at(path + ".transfers", k)));
    }
  }
  validate(p, hs, allow_empty_purposes);
  return p;
}

inline json query_to_json(const Query& q) {
  json j{{"kind", to_string(q.kind)}, {"entity", q.entity}, {"item", q.item}};
  if (q.kind == Query::Kind::kCanUse) j["purpose"] = q.purpose;
  if (q.kind == Query::Kind::kCanUseOtherThan) j["purposes"] = q.purposes;
  return j;
}

inline Query query_from_json(const json& j, const std::string& path) {
  const std::string kind = detail::str_field(j, "kind", path);
  Query q;
  q.entity = detail::str_field(j, "entity", path);
  q.item = detail::str_field(j, "item", path);
  if (kind == "can_receive") {
    q.kind = Query::Kind::kCanReceive;
  } else if (kind == "can_use") {
    q.kind = Query::Kind::kCanUse;
    q.purpose = detail::str_field(j, "purpose", path);
  } else if (kind == "can_use_other_than") {
    q.kind = Query::Kind::kCanUseOtherThan;
    const auto& ps = detail::array(detail::field(j, "purposes", path), path + ".purposes");
    for (std::size_t k = 0; k < ps.size(); ++k) q.purposes.insert(detail::str(ps[k], detail::at(path + ".purposes", k)));
  } else {
    throw ValidationError("question-kind",
                          path + ".kind must be can_receive, can_use or can_use_other_than, not '" + kind + "'");
  }
  return q;
}

inline json named_query_to_json(const NamedQuery& q) {
  json j = query_to_json(q.query);
  j["name"] = q.name;
  j["text"] = q.text;
  return j;
}

inline NamedQuery named_query_from_json(const json& j, const std::string& path) {
  return {detail::str_field(j, "name", path), detail::opt_str(j, "text", path).value_or(""), query_from_json(j, path)};
}

inline json assumption_to_json(const RiskAssumption& a) {
  json j{{"id", a.id}};
  if (!a.description.empty()) j["description"] = a.description;
  if (auto* t = std::get_if<IllegalTransferCapability>(&a.capability)) {
    j["kind"] = "illegal_transfer";
    j["from"] = t->from_entity;
    j["to"] = t->to_entity;
    if (t->datatype) j["datatype"] = *t->datatype;
  } else {
    const auto& u = std::get<IllegalUseInterest>(a.capability);
    j["kind"] = "illegal_use";
    j["entity"] = u.entity;
    j["purpose"] = u.purpose;
    if (u.datatype) j["datatype"] = *u.datatype;
  }
  return j;
}

inline RiskAssumption assumption_from_json(const json& j, const std::string& path) {
  RiskAssumption a;
  a.id = detail::str_field(j, "id", path);
  a.description = detail::opt_str(j, "description", path).value_or("");
  const std::string kind = detail::str_field(j, "kind", path);
  if (kind == "illegal_transfer") {
    a.capability = IllegalTransferCapability{detail::str_field(j, "from", path), detail::str_field(j, "to", path),
                                             detail::opt_str(j, "datatype", path)};
  } else if (kind == "illegal_use") {
    a.capability = IllegalUseInterest{detail::str_field(j, "entity", path), detail::str_field(j, "purpose", path),
                                      detail::opt_str(j, "datatype", path)};
  } else {
    throw ValidationError("assumption-kind", path + ".kind must be illegal_transfer or illegal_use, not '" + kind + "'");
  }
  return a;
}

inline json policy_list_to_json(const std::map<DeviceId, std::vector<PilotPolicy>>& ps) {
  json j = json::object();
  for (const auto& [dev, list] : ps) {
    json arr = json::array();
    for (const auto& p : list) arr.push_back(policy_to_json(p));
    j[dev] = arr;
  }
  return j;
}

inline std::map<DeviceId, std::vector<PilotPolicy>> policy_list_from_json(const json& j, const Hierarchies& hs,
                                                                          const std::string& path) {
  if (!j.is_object()) throw ValidationError("scenario-format", path + " must be an object keyed by device id");
  std::map<DeviceId, std::vector<PilotPolicy>> out;
  for (const auto& [dev, list] : j.items()) {
    const std::string p = path + "." + dev;
    const auto& arr = detail::array(list, p);
    std::set<PilotPolicy> unique;
    for (std::size_t k = 0; k < arr.size(); ++k) unique.insert(policy_from_json(arr[k], hs, detail::at(p, k)));
    out[dev] = std::vector<PilotPolicy>(unique.begin(), unique.end());
  }
  return out;
}

inline json event_to_json(const Event& e) {
  json j{{"kind", to_string(e.kind)}, {"sender", e.sender}, {"time", e.time.to_string()}, {"text", describe(e)}};
  if (!e.receiver.empty()) j["receiver"] = e.receiver;
  if (!e.item.empty()) j["item"] = e.item;
  if (!e.datatype.empty()) j["datatype"] = e.datatype;
  if (!e.purpose.empty()) j["purpose"] = e.purpose;
  if (e.policy) j["policy"] = policy_to_json(*e.policy);
  return j;
}

inline Event event_from_json(const json& j, const Hierarchies& hs, const std::string& path) {
  Event e{};
  const std::string kind = detail::str_field(j, "kind", path);
  auto k = event_kind_from_string(kind);
  if (!k) throw ValidationError("event-kind", path + ".kind: unknown event kind '" + kind + "'");
  e.kind = *k;
  e.sender = detail::str_field(j, "sender", path);
  e.receiver = detail::opt_str(j, "receiver", path).value_or("");
  e.item = detail::opt_str(j, "item", path).value_or("");
  e.datatype = detail::opt_str(j, "datatype", path).value_or("");
  e.purpose = detail::opt_str(j, "purpose", path).value_or("");
  if (j.contains("policy")) e.policy = policy_from_json(j["policy"], hs, path + ".policy", true);
  e.time = detail::date(detail::field(j, "time", path), path + ".time");
  return e;
}

inline json verdict_to_json(const Verdict& v) {
  json w = json::array();
  for (const auto& e : v.witness) w.push_back(event_to_json(e));
  json j{{"answer", v.answer ? "yes" : "no"},
         {"respected", v.respected ? "green" : "red"},
         {"by_ownership", v.by_ownership},
         {"states_explored", v.states_explored},
         {"witness", w}};
  if (v.subject) j["subject"] = *v.subject;
  if (v.purpose) j["purpose"] = *v.purpose;
  return j;
}

inline Verdict verdict_from_json(const json& j, const Hierarchies& hs, const std::string& path) {
  Verdict v;
  v.answer = detail::str_field(j, "answer", path) == "yes";
  v.respected = detail::str_field(j, "respected", path) == "green";
  v.by_ownership = detail::field(j, "by_ownership", path).get<bool>();
  v.states_explored = detail::field(j, "states_explored", path).get<std::size_t>();
  v.subject = detail::opt_str(j, "subject", path);
  v.purpose = detail::opt_str(j, "purpose", path);
  const auto& w = detail::array(detail::field(j, "witness", path), path + ".witness");
  for (std::size_t k = 0; k < w.size(); ++k) v.witness.push_back(event_from_json(w[k], hs, detail::at(path + ".witness", k)));
  return v;
}

// ---------------------------------------------------------------------------
// Scenario validation and (de)serialization

namespace detail {

inline void unique_ids(const std::vector<std::string>& ids, const std::string& what) {
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw ValidationError(what + "-id-unique", "duplicate " + what + " id '" + id + "'");
}

inline void check_condition_items(const Condition& c, const Scenario& s, const std::string& path) {
  for (const auto& i : referenced_items(c))
    if (std::none_of(s.items.begin(), s.items.end(), [&](const DataItem& x) { return x.id == i; }))
      throw ValidationError("condition-item-exists", path + ": condition references unknown item '" + i + "'");
  std::set<std::string> fns;
  std::vector<const Condition*> stack{&c};
  while (!stack.empty()) {
    const Condition* n = stack.back();
    stack.pop_back();
    switch (n->kind()) {
      case Condition::Kind::kAtom:
        collect_functions(n->lhs(), fns);
        collect_functions(n->rhs(), fns);
        break;
      case Condition::Kind::kNot: stack.push_back(&n->operand()); break;
      case Condition::Kind::kAnd:
        stack.push_back(&n->left());
        stack.push_back(&n->right());
        break;
      default: break;
    }
  }
  const auto& table = builtin_functions();
  for (const auto& f : fns) {
    const auto slash = f.rfind('/');
    auto it = table.find(f.substr(0, slash));
    if (it == table.end() || std::to_string(it->second.arity) != f.substr(slash + 1))
      throw UnregisteredSymbolError(f);
  }
}

inline void check_policy_refs(const PilotPolicy& p, const Scenario& s, const std::string& path) {
  check_condition_items(p.dcr.condition, s, path + ".dcr");
  for (const auto& t : p.transfers) check_condition_items(t.condition, s, path + ".transfers");
}

inline void check_device(const Scenario& s, const DeviceId& d, const std::string& path) {
  if (std::none_of(s.devices.begin(), s.devices.end(), [&](const Device& x) { return x.id == d; }))
    throw ValidationError("device-exists", path + ": unknown device '" + d + "'");
}

inline bool id_syntax(const std::string& id) {
  return !id.empty() && id.size() <= 128 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

}  // namespace detail

// Checks every cross-reference; throws the error naming the broken invariant.
inline void validate(const Scenario& s) {
  const auto& hs = s.hierarchies;
  if (!detail::id_syntax(s.id)) throw ValidationError("scenario-id-syntax", "scenario id must match [A-Za-z0-9_-]+");
  std::vector<std::string> ids;
  for (const auto& d : s.devices) {
    hs.entities.require(d.entity);
    ids.push_back(d.id);
  }
  detail::unique_ids(ids, "device");
  ids.clear();
  for (const auto& i : s.items) {
    if (!text::item_identifier(i.id))
      throw ValidationError("item-id-syntax", "item id '" + i.id + "' must match [a-z_][A-Za-z0-9_]*");
    hs.datatypes.require(i.datatype);
    detail::check_device(s, i.owner, "items." + i.id + ".owner");
    auto d = std::find_if(s.devices.begin(), s.devices.end(), [&](const Device& x) { return x.id == i.owner; });
    if (d->kind != DeviceKind::kSubject)
      throw ValidationError("item-owner-subject", "owner '" + i.owner + "' of item '" + i.id + "' is not a DS device");
    ids.push_back(i.id);
  }
  detail::unique_ids(ids, "item");
  for (const auto& [dev, ps] : s.policies) {
    detail::check_device(s, dev, "policies");
    for (const auto& p : ps) {
      validate(p, hs);
      detail::check_policy_refs(p, s, "policies." + dev);
    }
  }
  ids.clear();
  for (const auto& a : s.assumptions) {
    ids.push_back(a.id);
    if (auto* t = std::get_if<IllegalTransferCapability>(&a.capability)) {
      hs.entities.require(t->from_entity);
      hs.entities.require(t->to_entity);
      if (t->datatype) hs.datatypes.require(*t->datatype);
    } else {
      const auto& u = std::get<IllegalUseInterest>(a.capability);
      hs.entities.require(u.entity);
      hs.purposes.require(u.purpose);
      if (u.datatype) hs.datatypes.require(*u.datatype);
    }
  }
  detail::unique_ids(ids, "assumption");
  ids.clear();
  const Universe u = s.universe();
  for (const auto& q : s.questions) {
    ids.push_back(q.name);
    check_query(u, q.query);
  }
  detail::unique_ids(ids, "question");
  ids.clear();
  for (const auto& v : s.policy_variants) {
    ids.push_back(v.name);
    for (const auto& [dev, ps] : v.policies) {
      detail::check_device(s, dev, "variants.policies." + v.name);
      for (const auto& p : ps) {
        validate(p, hs);
        detail::check_policy_refs(p, s, "variants.policies." + v.name + "." + dev);
      }
    }
  }
  detail::unique_ids(ids, "policy-variant");
  ids.clear();
  for (const auto& v : s.assumption_variants) {
    ids.push_back(v.name);
    for (const auto& a : v.assume)
      if (std::none_of(s.assumptions.begin(), s.assumptions.end(), [&](const RiskAssumption& x) { return x.id == a; }))
        throw ValidationError("assumption-exists", "variants.assumptions." + v.name + ": unknown assumption '" + a + "'");
  }
  detail::unique_ids(ids, "assumption-variant");
}

inline json scenario_to_json(const Scenario& s) {
  json devices = json::array();
  for (const auto& d : s.devices) devices.push_back({{"id", d.id}, {"entity", d.entity}, {"kind", to_string(d.kind)}});
  json items = json::array();
  for (const auto& i : s.items)
    items.push_back({{"id", i.id}, {"datatype", i.datatype}, {"owner", i.owner}, {"value", value_to_json(i.value)}});
  json assumptions = json::array();
  for (const auto& a : s.assumptions) assumptions.push_back(assumption_to_json(a));
  json questions = json::array();
  for (const auto& q : s.questions) questions.push_back(named_query_to_json(q));
  json pvs = json::array();
  for (const auto& v : s.policy_variants) pvs.push_back({{"name", v.name}, {"policies", policy_list_to_json(v.policies)}});
  json avs = json::array();
  for (const auto& v : s.assumption_variants) avs.push_back({{"name", v.name}, {"assume", v.assume}});
  return {{"id", s.id},
          {"hierarchies", hierarchies_to_json(s.hierarchies)},
          {"devices", devices},
          {"items", items},
          {"policies", policy_list_to_json(s.policies)},
          {"assumptions", assumptions},
          {"now", s.now.to_string()},
          {"questions", questions},
          {"variants", {{"policies", pvs}, {"assumptions", avs}}}};
}

inline Scenario scenario_from_json(const json& j, const std::string& default_id = "scenario") {
  if (!j.is_object()) throw ValidationError("scenario-format", "scenario must be a JSON object");
  Scenario s;
  try {
    s.id = detail::opt_str(j, "id", "scenario").value_or(default_id);
    s.hierarchies = hierarchies_from_json(detail::field(j, "hierarchies", "scenario"), "hierarchies");
    const auto& hs = s.hierarchies;

    const auto& ds = detail::array(detail::field(j, "devices", "scenario"), "devices");
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const auto p = detail::at("devices", k);
      Device d{detail::str_field(ds[k], "id", p), "", DeviceKind::kController};
      d.entity = detail::opt_str(ds[k], "entity", p).value_or(d.id);
      const std::string kind = detail::str_field(ds[k], "kind", p);
      if (kind == "DS") {
        d.kind = DeviceKind::kSubject;
      } else if (kind != "DC") {
        throw ValidationError("device-kind", p + ".kind must be DS or DC");
      }
      s.devices.push_back(std::move(d));
    }
    std::sort(s.devices.begin(), s.devices.end(), [](const Device& a, const Device& b) { return a.id < b.id; });

    const auto& is = detail::array(detail::field(j, "items", "scenario"), "items");
    for (std::size_t k = 0; k < is.size(); ++k) {
      const auto p = detail::at("items", k);
      s.items.push_back({detail::str_field(is[k], "id", p), detail::str_field(is[k], "datatype", p),
                         detail::str_field(is[k], "owner", p),
                         is[k].contains("value") ? value_from_json(is[k]["value"], p + ".value") : std::nullopt});
    }
    std::sort(s.items.begin(), s.items.end(), [](const DataItem& a, const DataItem& b) { return a.id < b.id; });

    if (j.contains("policies")) s.policies = policy_list_from_json(j["policies"], hs, "policies");

    if (j.contains("assumptions")) {
      const auto& as = detail::array(j["assumptions"], "assumptions");
      for (std::size_t k = 0; k < as.size(); ++k) s.assumptions.push_back(assumption_from_json(as[k], detail::at("assumptions", k)));
      std::sort(s.assumptions.begin(), s.assumptions.end(),
                [](const RiskAssumption& a, const RiskAssumption& b) { return a.id < b.id; });
    }

    s.now = detail::date(detail::field(j, "now", "scenario"), "now");

    if (j.contains("questions")) {
      const auto& qs = detail::array(j["questions"], "questions");
      for (std::size_t k = 0; k < qs.size(); ++k) s.questions.push_back(named_query_from_json(qs[k], detail::at("questions", k)));
    }

    if (j.contains("variants")) {
      const auto& v = j["variants"];
      if (v.contains("policies")) {
        const auto& pv = detail::array(v["policies"], "variants.policies");
        for (std::size_t k = 0; k < pv.size(); ++k) {
          const auto p = detail::at("variants.policies", k);
          s.policy_variants.push_back(
              {detail::str_field(pv[k], "name", p), policy_list_from_json(detail::field(pv[k], "policies", p), hs, p + ".policies")});
        }
      }
      if (v.contains("assumptions")) {
        const auto& av = detail::array(v["assumptions"], "variants.assumptions");
        for (std::size_t k = 0; k < av.size(); ++k) {
          const auto p = detail::at("variants.assumptions", k);
          AssumptionVariant a{detail::str_field(av[k], "name", p), {}};
          if (av[k].contains("assume")) {
            const auto& ids = detail::array(av[k]["assume"], p + ".assume");
            for (std::size_t m = 0; m < ids.size(); ++m) a.assume.push_back(detail::str(ids[m], detail::at(p + ".assume", m)));
          }
          std::sort(a.assume.begin(), a.assume.end());
          a.assume.erase(std::unique(a.assume.begin(), a.assume.end()), a.assume.end());
          s.assumption_variants.push_back(std::move(a));
        }
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("scenario-format", e.what());
  }
  validate(s);
  return s;
}

inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t off = e.byte > 0 ? e.byte - 1 : 0;
    throw SyntaxError("invalid JSON: " + std::string(e.what()), text::span_at(text, off, 1));
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string scenario_id_from_path(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  for (const char* ext : {".scenario.json", ".json"}) {
    const std::string e = ext;
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) {
      return name.substr(0, name.size() - e.size());
    }
  }
  return name;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(parse_json_text(read_file(path)), scenario_id_from_path(path));
}

// ---------------------------------------------------------------------------
// Analysis records

struct RecordColumn {
  std::string assumption_variant;
  std::vector<std::string> assume;
  std::string policy_variant;
  std::map<DeviceId, std::vector<PilotPolicy>> overrides;
  std::size_t states = 0;

  friend bool operator==(const RecordColumn&, const RecordColumn&) = default;
};

struct AnalysisRecord {
  std::string scenario_id;
  std::string scenario_sha256;
  std::vector<RecordColumn> columns;
  std::vector<NamedQuery> rows;
  std::vector<std::vector<Verdict>> cells;  // [row][column]
  std::string created;                      // UTC, ISO 8601
  std::string engine = kEngineVersion;

  friend bool operator==(const AnalysisRecord&, const AnalysisRecord&) = default;
};

inline std::string utc_now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json record_inputs_json(const AnalysisRecord& r) {
  json cols = json::array();
  for (const auto& c : r.columns)
    cols.push_back({{"assumption_variant", c.assumption_variant},
                    {"assume", c.assume},
                    {"policy_variant", c.policy_variant},
                    {"overrides", policy_list_to_json(c.overrides)}});
  json rows = json::array();
  for (const auto& q : r.rows) rows.push_back(named_query_to_json(q));
  return {{"scenario", r.scenario_sha256}, {"columns", cols}, {"rows", rows}};
}

// Content address: scenario, variants and questions; not the run time.
inline std::string record_id(const AnalysisRecord& r) { return sha256_hex(record_inputs_json(r).dump()).substr(0, 16); }

inline json record_to_json(const AnalysisRecord& r) {
  json cols = json::array();
  for (const auto& c : r.columns)
    cols.push_back({{"assumption_variant", c.assumption_variant},
                    {"assume", c.assume},
                    {"policy_variant", c.policy_variant},
                    {"overrides", policy_list_to_json(c.overrides)},
                    {"states", c.states}});
  json rows = json::array();
  for (const auto& q : r.rows) rows.push_back(named_query_to_json(q));
  json cells = json::array();
  for (const auto& row : r.cells) {
    json jr = json::array();
    for (const auto& v : row) jr.push_back(verdict_to_json(v));
    cells.push_back(jr);
  }
  return {{"id", record_id(r)},
          {"scenario", {{"id", r.scenario_id}, {"sha256", r.scenario_sha256}}},
          {"columns", cols},
          {"rows", rows},
          {"cells", cells},
          {"created", r.created},
          {"engine", r.engine}};
}

// Policies inside records are checked against the scenario's hierarchies.
inline AnalysisRecord record_from_json(const json& j, const Hierarchies& hs) {
  AnalysisRecord r;
  try {
    const auto& sc = detail::field(j, "scenario", "record");
    r.scenario_id = detail::str_field(sc, "id", "record.scenario");
    r.scenario_sha256 = detail::str_field(sc, "sha256", "record.scenario");
    const auto& cols = detail::array(detail::field(j, "columns", "record"), "record.columns");
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto p = detail::at("record.columns", k);
      RecordColumn c;
      c.assumption_variant = detail::str_field(cols[k], "assumption_variant", p);
      c.policy_variant = detail::str_field(cols[k], "policy_variant", p);
      for (const auto& a : detail::array(detail::field(cols[k], "assume", p), p + ".assume")) c.assume.push_back(detail::str(a, p + ".assume"));
      c.overrides = policy_list_from_json(detail::field(cols[k], "overrides", p), hs, p + ".overrides");
      c.states = detail::field(cols[k], "states", p).get<std::size_t>();
      r.columns.push_back(std::move(c));
    }
    const auto& rows = detail::array(detail::field(j, "rows", "record"), "record.rows");
    for (std::size_t k = 0; k < rows.size(); ++k) r.rows.push_back(named_query_from_json(rows[k], detail::at("record.rows", k)));
    const auto& cells = detail::array(detail::field(j, "cells", "record"), "record.cells");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto p = detail::at("record.cells", k);
      std::vector<Verdict> row;
      const auto& cr = detail::array(cells[k], p);
      for (std::size_t m = 0; m < cr.size(); ++m) row.push_back(verdict_from_json(cr[m], hs, detail::at(p, m)));
      r.cells.push_back(std::move(row));
    }
    r.created = detail::str_field(j, "created", "record");
    r.engine = detail::str_field(j, "engine", "record");
  } catch (const json::exception& e) {
    throw ValidationError("record-format", e.what());
  }
  if (r.cells.size() != r.rows.size() ||
      std::any_of(r.cells.begin(), r.cells.end(), [&](const auto& row) { return row.size() != r.columns.size(); })) {
    throw ValidationError("record-shape", "record cells must form a rows x columns table");
  }
  return r;
}

inline std::string scenario_sha256(const Scenario& s) { return sha256_hex(scenario_to_json(s).dump()); }

inline Universe column_universe(const Scenario& s, const RecordColumn& c) {
  PolicyVariant pv{c.policy_variant, c.overrides};
  return with_variant(s.universe(), &pv, c.assume);
}

// Runs the analysis for the given variants and questions.
inline AnalysisRecord run_analysis(const Scenario& s, const std::vector<PolicyVariant>& policies,
                                   const std::vector<AssumptionVariant>& assumptions,
                                   const std::vector<NamedQuery>& questions, ExploreOptions opts = {}) {
  const AnswerMatrix m = answer_matrix(s.universe(), policies, assumptions, questions, opts);
  AnalysisRecord r;
  r.scenario_id = s.id;
  r.scenario_sha256 = scenario_sha256(s);
  r.rows = questions;
  r.cells = m.cells;
  r.created = utc_now_iso8601();
  std::size_t k = 0;
  for (const auto& av : assumptions)
    for (const auto& pv : policies) r.columns.push_back({av.name, av.assume, pv.name, pv.policies, m.columns[k++].states});
  return r;
}

// The full table declared by the scenario's variants and questions. Without
// declared variants a single column uses the base policies and no assumptions.
inline AnalysisRecord run_table(const Scenario& s, ExploreOptions opts = {}) {
  std::vector<PolicyVariant> pvs = s.policy_variants;
  std::vector<AssumptionVariant> avs = s.assumption_variants;
  if (pvs.empty()) pvs.push_back({"base", {}});
  if (avs.empty()) avs.push_back({"none", {}});
  return run_analysis(s, pvs, avs, s.questions, opts);
}

// A record is valid for `s` when it was computed from the same scenario and
// every stored witness replays through the execution model.
inline void validate_record(const AnalysisRecord& r, const Scenario& s) {
  if (r.scenario_sha256 != scenario_sha256(s))
    throw ValidationError("record-scenario", "record was computed from a different scenario");
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    const Universe u = column_universe(s, r.columns[c]);
    for (std::size_t q = 0; q < r.rows.size(); ++q) {
      if (!witness_valid(u, r.rows[q].query, r.cells[q][c]))
        throw ValidationError("record-witness", "witness for '" + r.rows[q].name + "' in column " +
                                                    std::to_string(c) + " does not replay");
    }
  }
}

// ---------------------------------------------------------------------------
// Store

// A directory of scenarios and records. Writes take an exclusive advisory
// lock on `<dir>/.lock` and go through a temporary file plus rename, so a
// failed write never leaves a partial file behind.
class Store {
 public:
  explicit Store(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path scenario_path(const std::string& id) const { return dir_ / (id + ".scenario.json"); }
  std::filesystem::path record_path(const std::string& id) const { return dir_ / (id + ".record.json"); }

  std::filesystem::path save_scenario(const Scenario& s) const {
    validate(s);
    const auto path = scenario_path(s.id);
    write_atomic(path, canonical_dump(scenario_to_json(s)));
    return path;
  }

  std::optional<Scenario> find_scenario(const std::string& id) const {
    if (!detail::id_syntax(id)) return std::nullopt;
    const auto path = scenario_path(id);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return load_scenario(path);
  }

  std::filesystem::path save_record(const AnalysisRecord& r) const {
    const auto path = record_path(record_id(r));
    write_atomic(path, canonical_dump(record_to_json(r)));
    return path;
  }

  std::optional<AnalysisRecord> find_record(const std::string& id) const {
    if (!detail::id_syntax(id)) return std::nullopt;
    const auto path = record_path(id);
    if (!std::filesystem::exists(path)) return std::nullopt;
    const json j = parse_json_text(read_file(path));
    auto s = find_scenario(detail::str_field(detail::field(j, "scenario", "record"), "id", "record.scenario"));
    return record_from_json(j, s ? s->hierarchies : Hierarchies{});
  }

 private:
  void write_atomic(const std::filesystem::path& path, const std::string& content) const {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (!std::filesystem::is_directory(dir_)) throw IoError("store '" + dir_.string() + "' is not a directory");

    const std::string lock_path = (dir_ / ".lock").string();
    const int lock = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (lock < 0) throw IoError("cannot open lock file '" + lock_path + "'");
    struct Unlock {
      int fd;
      ~Unlock() {
        ::flock(fd, LOCK_UN);
        ::close(fd);
      }
    } unlock{lock};
    if (::flock(lock, LOCK_EX) != 0) throw IoError("cannot lock store '" + dir_.string() + "'");

    std::string tmpl = (dir_ / ".tmp-XXXXXX").string();
    const int fd = ::mkstemp(tmpl.data());
    if (fd < 0) throw IoError("cannot create a file in '" + dir_.string() + "'");
    std::size_t off = 0;
    bool ok = true;
    while (off < content.size()) {
      const auto n = ::write(fd, content.data() + off, content.size() - off);
      if (n <= 0) {
        ok = false;
        break;
      }
      off += static_cast<std::size_t>(n);
    }
    ok = ::fsync(fd) == 0 && ok;
    ok = ::close(fd) == 0 && ok;
    if (!ok || std::rename(tmpl.c_str(), path.c_str()) != 0) {
      ::unlink(tmpl.c_str());
      throw IoError("cannot write '" + path.string() + "'");
    }
  }

  std::filesystem::path dir_;
};

}  // namespace pilot
