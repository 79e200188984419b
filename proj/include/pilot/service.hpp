#pragma once

// Request handling behind both the HTTP server and the CLI. `Service::handle`
// takes a method, a path and a JSON body and returns a status and a JSON
// body; it knows nothing about sockets.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pilot/error.hpp"
#include "pilot/policy.hpp"
#include "pilot/policy_text.hpp"
#include "pilot/risk_analyzer.hpp"
#include "pilot/scenario.hpp"

namespace pilot {

// Labels mentioned by a policy given as text, {"text": ...} or structured JSON.
inline void collect_labels(const json& spec, LabelUse& out) {
  if (spec.is_string() || (spec.is_object() && spec.contains("text"))) {
    const json& t = spec.is_string() ? spec : spec["text"];
    if (!t.is_string()) throw ValidationError("policy-format", "policy text must be a string");
    const auto doc = parse_document(t.get<std::string>(), nullptr);
    out.entities.insert(doc.labels.entities.begin(), doc.labels.entities.end());
    out.datatypes.insert(doc.labels.datatypes.begin(), doc.labels.datatypes.end());
    out.purposes.insert(doc.labels.purposes.begin(), doc.labels.purposes.end());
    return;
  }
  if (!spec.is_object()) throw ValidationError("policy-format", "a policy is a text or a JSON object");
  auto rule = [&out](const json& r) {
    if (!r.is_object()) return;
    if (r.contains("entity") && r["entity"].is_string()) out.entities.insert(r["entity"].get<std::string>());
    if (r.contains("purposes") && r["purposes"].is_array())
      for (const auto& p : r["purposes"])
        if (p.is_string()) out.purposes.insert(p.get<std::string>());
  };
  if (spec.contains("datatype") && spec["datatype"].is_string()) out.datatypes.insert(spec["datatype"].get<std::string>());
  if (spec.contains("dcr")) rule(spec["dcr"]);
  if (spec.contains("transfers") && spec["transfers"].is_array())
    for (const auto& t : spec["transfers"]) rule(t);
}

// Unordered hierarchies over the given labels; used when no scenario is named.
inline Hierarchies flat_hierarchies(const LabelUse& l) {
  return {Hierarchy("entity", l.entities), Hierarchy("datatype", l.datatypes), Hierarchy("purpose", l.purposes)};
}

inline Hierarchies infer_hierarchies(const std::vector<json>& specs) {
  LabelUse l;
  for (const auto& s : specs) collect_labels(s, l);
  return flat_hierarchies(l);
}

inline json error_body(const Error& e) {
  json err{{"kind", to_string(e.kind())}, {"violation", e.violation()}, {"message", e.what()}};
  std::optional<SourceSpan> span;
  if (auto* s = dynamic_cast<const SyntaxError*>(&e)) span = s->span();
  if (auto* u = dynamic_cast<const UnknownLabelError*>(&e)) span = u->span();
  if (span)
    err["span"] = {{"offset", span->offset}, {"length", span->length}, {"line", span->line}, {"column", span->column}};
  return {{"error", err}};
}

inline int status_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIncomparable:
    case ErrorKind::kBudgetExceeded: return 422;
    case ErrorKind::kIo: return 500;
    default: return 400;
  }
}

struct Response {
  int status = 200;
  json body;
};

inline json spans_to_json(const std::map<std::string, SourceSpan>& spans) {
  json j = json::object();
  for (const auto& [k, s] : spans)
    j[k] = {{"offset", s.offset}, {"length", s.length}, {"line", s.line}, {"column", s.column}};
  return j;
}

class Service {
 public:
  explicit Service(Store store, ExploreOptions opts = {}) : store_(std::move(store)), opts_(opts) {}

  const Store& store() const { return store_; }

  Response handle(std::string_view method, std::string_view target, const std::string& body) const {
    try {
      return route(method, split(strip_query(target)), body);
    } catch (const NotFound& nf) {
      return {404, {{"error", {{"kind", "not-found"}, {"violation", "not-found"}, {"message", nf.what}}}}};
    } catch (const Error& e) {
      return {status_for(e), error_body(e)};
    } catch (const json::exception& e) {
      return {400, {{"error", {{"kind", "validation"}, {"violation", "request-format"}, {"message", e.what()}}}}};
    }
  }

 private:
  struct NotFound {
    std::string what;
  };

  static std::string_view strip_query(std::string_view t) { return t.substr(0, t.find('?')); }

  static std::vector<std::string> split(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
      while (i < path.size() && path[i] == '/') ++i;
      const std::size_t j = path.find('/', i);
      const std::size_t end = j == std::string_view::npos ? path.size() : j;
      if (end > i) out.emplace_back(path.substr(i, end - i));
      i = end;
    }
    return out;
  }

  static json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = parse_json_text(body);
    if (!j.is_object()) throw ValidationError("request-format", "request body must be a JSON object");
    return j;
  }

  Response route(std::string_view method, const std::vector<std::string>& p, const std::string& body) const {
    const bool get = method == "GET";
    const bool post = method == "POST";
    if (p.size() == 1 && p[0] == "scenarios" && post) return create_scenario(body);
    if (p.size() == 2 && p[0] == "scenarios" && get) return {200, scenario_to_json(scenario(p[1]))};
    if (p.size() == 3 && p[0] == "scenarios" && p[2] == "assumptions" && get) return assumptions(p[1]);
    if (p.size() == 3 && p[0] == "scenarios" && p[2] == "verify" && post) return verify(p[1], parse_body(body));
    if (p.size() == 2 && p[0] == "policies" && post) {
      const json b = parse_body(body);
      if (p[1] == "parse") return parse(b);
      if (p[1] == "subsumption") return subsumption(b);
      if (p[1] == "join") return join(b);
    }
    if (p.size() == 2 && p[0] == "records" && get) {
      auto r = store_.find_record(p[1]);
      if (!r) throw NotFound{"no record '" + p[1] + "'"};
      return {200, record_to_json(*r)};
    }
    throw NotFound{"no route for " + std::string(method) + " /" + join_path(p)};
  }

  static std::string join_path(const std::vector<std::string>& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) out += (i ? "/" : "") + p[i];
    return out;
  }

  Scenario scenario(const std::string& id) const {
    auto s = store_.find_scenario(id);
    if (!s) throw NotFound{"no scenario '" + id + "'"};
    return *s;
  }

  Response create_scenario(const std::string& body) const {
    json j = parse_json_text(body);
    if (j.is_object() && !j.contains("id")) {
      json copy = j;
      copy.erase("id");
      j["id"] = sha256_hex(copy.dump()).substr(0, 16);
    }
    const Scenario s = scenario_from_json(j);
    store_.save_scenario(s);
    return {201, {{"id", s.id}, {"scenario", scenario_to_json(s)}}};
  }

  Response assumptions(const std::string& id) const {
    const Scenario s = scenario(id);
    json list = json::array();
    for (const auto& a : s.assumptions) list.push_back(assumption_to_json(a));
    json variants = json::array();
    for (const auto& v : s.assumption_variants) variants.push_back({{"name", v.name}, {"assume", v.assume}});
    return {200, {{"assumptions", list}, {"variants", variants}}};
  }

  // Hierarchies for a policy request: a stored scenario, inline hierarchies,
  // or flat ones inferred from the policies themselves.
  Hierarchies hierarchies_for(const json& b, const std::vector<json>& specs) const {
    if (b.contains("scenario")) return scenario(detail::str(b["scenario"], "scenario")).hierarchies;
    if (b.contains("hierarchies")) return hierarchies_from_json(b["hierarchies"], "hierarchies");
    return infer_hierarchies(specs);
  }

  static json policy_response(const PilotPolicy& p) {
    return {{"policy", policy_to_json(p)}, {"text", render_policy(p)}};
  }

  Response parse(const json& b) const {
    const json& spec = b.contains("text") ? b["text"] : detail::field(b, "policy", "request");
    const Hierarchies hs = hierarchies_for(b, {spec});
    const PilotPolicy p = policy_from_json(spec, hs, "policy");
    json out = policy_response(p);
    if (spec.is_string()) out["spans"] = spans_to_json(parse_document(spec.get<std::string>(), &hs).spans);
    return {200, out};
  }

  Response subsumption(const json& b) const {
    const json& s1 = detail::field(b, "p1", "request");
    const json& s2 = detail::field(b, "p2", "request");
    const Hierarchies hs = hierarchies_for(b, {s1, s2});
    const PilotPolicy p1 = policy_from_json(s1, hs, "p1", true);
    const PilotPolicy p2 = policy_from_json(s2, hs, "p2", true);
    return {200, {{"subsumes", policy_subsumes(p1, p2, hs)}, {"converse", policy_subsumes(p2, p1, hs)}}};
  }

  Response join(const json& b) const {
    const json& s1 = detail::field(b, "p1", "request");
    const json& s2 = detail::field(b, "p2", "request");
    const Hierarchies hs = hierarchies_for(b, {s1, s2});
    const PilotPolicy p1 = policy_from_json(s1, hs, "p1", true);
    const PilotPolicy p2 = policy_from_json(s2, hs, "p2", true);
    JoinOptions opts;
    if (b.contains("literal_min")) opts.literal_min = b["literal_min"].get<bool>();
    const PilotPolicy j = policy_join(p1, p2, hs, opts);
    json out = policy_response(j);
    out["subsumes_both"] = policy_subsumes(j, p1, hs) && policy_subsumes(j, p2, hs);
    out["empty_purposes"] = j.dcr.dur.purposes.empty();
    return {200, out};
  }

  Response verify(const std::string& id, const json& b) const {
    const Scenario s = scenario(id);
    PolicyVariant pv{"base", {}};
    if (b.contains("policy_variant")) {
      pv = s.policy_variant(detail::str(b["policy_variant"], "policy_variant"));
    } else if (b.contains("policies")) {
      pv = {"inline", policy_list_from_json(b["policies"], s.hierarchies, "policies")};
      for (const auto& [dev, ps] : pv.policies) {
        detail::check_device(s, dev, "policies");
        for (const auto& p : ps) detail::check_policy_refs(p, s, "policies." + dev);
      }
    }
    AssumptionVariant av{"selected", {}};
    if (b.contains("assumption_variant")) {
      const std::string name = detail::str(b["assumption_variant"], "assumption_variant");
      auto it = std::find_if(s.assumption_variants.begin(), s.assumption_variants.end(),
                             [&](const AssumptionVariant& v) { return v.name == name; });
      if (it == s.assumption_variants.end())
        throw ValidationError("variant-exists", "unknown assumption variant '" + name + "'");
      av = *it;
    }
    if (b.contains("assume")) {
      for (const auto& a : detail::array(b["assume"], "assume")) av.assume.push_back(detail::str(a, "assume"));
      std::sort(av.assume.begin(), av.assume.end());
      av.assume.erase(std::unique(av.assume.begin(), av.assume.end()), av.assume.end());
    }
    const json& qj = detail::field(b, "question", "request");
    const NamedQuery q = qj.is_string() ? s.question(qj.get<std::string>())
                                        : NamedQuery{"inline", "", query_from_json(qj, "question")};
    check_query(s.universe(), q.query);

    const AnalysisRecord r = run_analysis(s, {pv}, {av}, {q}, opts_);
    store_.save_record(r);
    const Verdict& v = r.cells[0][0];
    json out = verdict_to_json(v);
    out["question"] = named_query_to_json(q);
    out["record"] = record_id(r);
    return {200, out};
  }

  Store store_;
  ExploreOptions opts_;
};

}  // namespace pilot
