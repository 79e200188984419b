// Command-line front end: parse, check, join, verify, table, serve.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "pilot/pilot.hpp"

namespace {

using pilot::json;

enum class Format { kText, kJson };

std::string abstract_rule(const pilot::DataCommunicationRule& r) {
  std::string ps;
  for (const auto& p : r.dur.purposes) ps += (ps.empty() ? "" : ", ") + p;
  return "<" + pilot::render_condition(r.condition) + ", " + r.entity + ", <{" + ps + "}, " +
         r.dur.retention.to_string() + ">>";
}

std::string abstract_policy(const pilot::PilotPolicy& p) {
  std::string trs;
  for (const auto& t : p.transfers) trs += (trs.empty() ? "" : ", ") + abstract_rule(t);
  return "(" + p.datatype + ", " + abstract_rule(p.dcr) + ", {" + trs + "})";
}

pilot::Hierarchies hierarchies_for(const std::optional<std::string>& scenario, const std::vector<std::string>& texts) {
  if (scenario) return pilot::load_scenario(*scenario).hierarchies;
  std::vector<json> specs(texts.begin(), texts.end());
  return pilot::infer_hierarchies(specs);
}

pilot::PilotPolicy read_policy(const std::string& path, const std::string& text, const pilot::Hierarchies& hs) {
  try {
    return pilot::parse_policy(text, hs);
  } catch (const pilot::SyntaxError& e) {
    throw pilot::SyntaxError(path + ": " + e.message(), e.span());
  }
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string cell_text(const pilot::Verdict& v) {
  std::string s = v.answer ? "Yes" : "No";
  if (!v.respected) s += " (red)";
  return s;
}

void print_witness(const pilot::Verdict& v) {
  if (v.by_ownership) {
    std::cout << "witness: none, the item's owner holds it\n";
    return;
  }
  if (v.witness.empty()) return;
  std::cout << "witness:\n";
  for (std::size_t k = 0; k < v.witness.size(); ++k)
    std::cout << "  " << (k + 1) << ". " << pilot::describe(v.witness[k]) << "\n";
}

void print_table(const pilot::AnalysisRecord& r) {
  std::size_t qw = 8;
  for (const auto& q : r.rows) qw = std::max(qw, (q.text.empty() ? q.name : q.text).size());
  std::size_t cw = 9;
  for (const auto& c : r.columns) cw = std::max({cw, c.assumption_variant.size(), c.policy_variant.size()});
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  std::cout << pad("Question", qw);
  for (const auto& c : r.columns) std::cout << " | " << pad(c.assumption_variant, cw);
  std::cout << "\n" << pad("", qw);
  for (const auto& c : r.columns) std::cout << " | " << pad(c.policy_variant, cw);
  std::cout << "\n" << std::string(qw, '-');
  for (std::size_t k = 0; k < r.columns.size(); ++k) std::cout << "-+-" << std::string(cw, '-');
  std::cout << "\n";
  for (std::size_t q = 0; q < r.rows.size(); ++q) {
    std::cout << pad(r.rows[q].text.empty() ? r.rows[q].name : r.rows[q].text, qw);
    for (const auto& v : r.cells[q]) std::cout << " | " << pad(cell_text(v), cw);
    std::cout << "\n";
  }
}

std::optional<std::filesystem::path> store_dir(const std::string& flag) {
  if (!flag.empty()) return std::filesystem::path(flag);
  if (const char* env = std::getenv("PILOT_STORE"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PILOT privacy policies: parsing, subsumption, join and risk analysis"};
  app.require_subcommand(1);
  std::string format_name = "text";
  app.add_option("--format", format_name, "Output format")->check(CLI::IsMember({"text", "json"}));

  std::optional<std::string> scenario_flag;
  auto add_scenario_flag = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_flag, "Scenario whose hierarchies apply (default: labels as found)");
  };

  auto* parse = app.add_subcommand("parse", "Parse a .pilot file and print its abstract form");
  std::string parse_file;
  parse->add_option("file", parse_file)->required();
  add_scenario_flag(parse);

  auto* check = app.add_subcommand("check", "Does the first policy subsume the second?");
  std::string check_a, check_b;
  check->add_option("p1", check_a)->required();
  check->add_option("p2", check_b)->required();
  add_scenario_flag(check);

  auto* joincmd = app.add_subcommand("join", "Join two policies");
  std::string join_a, join_b;
  bool literal_min = false;
  joincmd->add_option("p1", join_a)->required();
  joincmd->add_option("p2", join_b)->required();
  joincmd->add_flag("--literal-min", literal_min, "On incomparable labels keep the second one");
  add_scenario_flag(joincmd);

  std::string store_flag;
  auto* verify = app.add_subcommand("verify", "Answer one question of a scenario");
  std::string verify_scenario, question, variant;
  std::vector<std::string> assume;
  verify->add_option("scenario", verify_scenario)->required();
  verify->add_option("--question", question)->required();
  verify->add_option("--assume", assume, "Risk assumption id (repeatable)");
  verify->add_option("--variant", variant, "Policy variant declared by the scenario");
  verify->add_option("--store", store_flag, "Store directory for the analysis record (default: $PILOT_STORE)");

  auto* table = app.add_subcommand("table", "Answer every question under every declared variant");
  std::string table_scenario;
  table->add_option("scenario", table_scenario)->required();
  table->add_option("--store", store_flag, "Store directory for the analysis record (default: $PILOT_STORE)");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--store", store_flag, "Store directory (default: $PILOT_STORE)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const Format format = format_name == "json" ? Format::kJson : Format::kText;

  try {
    if (*parse) {
      const std::string text = pilot::read_file(parse_file);
      const auto hs = hierarchies_for(scenario_flag, {text});
      const auto p = read_policy(parse_file, text, hs);
      if (format == Format::kJson) {
        std::cout << json{{"policy", pilot::policy_to_json(p)}, {"text", pilot::render_policy(p)}}.dump(2) << "\n";
      } else {
        std::cout << abstract_policy(p) << "\n";
      }
      return 0;
    }
    if (*check || *joincmd) {
      const std::string& fa = *check ? check_a : join_a;
      const std::string& fb = *check ? check_b : join_b;
      const std::string ta = pilot::read_file(fa);
      const std::string tb = pilot::read_file(fb);
      const auto hs = hierarchies_for(scenario_flag, {ta, tb});
      const auto pa = read_policy(fa, ta, hs);
      const auto pb = read_policy(fb, tb, hs);
      if (*check) {
        const bool s = pilot::policy_subsumes(pa, pb, hs);
        if (format == Format::kJson) {
          std::cout << json{{"subsumes", s}}.dump() << "\n";
        } else {
          std::cout << "subsumes: " << yes_no(s) << "\n";
        }
        return 0;
      }
      pilot::JoinOptions opts;
      opts.literal_min = literal_min;
      const auto j = pilot::policy_join(pa, pb, hs, opts);
      if (format == Format::kJson) {
        std::cout << json{{"policy", pilot::policy_to_json(j)}, {"text", pilot::render_policy(j)}}.dump(2) << "\n";
      } else {
        std::cout << pilot::render_policy(j) << "\n";
      }
      return 0;
    }
    if (*verify) {
      const auto s = pilot::load_scenario(verify_scenario);
      pilot::PolicyVariant pv{"base", {}};
      if (!variant.empty()) pv = s.policy_variant(variant);
      std::sort(assume.begin(), assume.end());
      assume.erase(std::unique(assume.begin(), assume.end()), assume.end());
      const auto& q = s.question(question);
      const auto r = pilot::run_analysis(s, {pv}, {{"selected", assume}}, {q});
      std::string record;
      if (auto dir = store_dir(store_flag)) {
        pilot::Store(*dir).save_record(r);
        record = pilot::record_id(r);
      }
      const auto& v = r.cells[0][0];
      if (format == Format::kJson) {
        json out = pilot::verdict_to_json(v);
        out["question"] = pilot::named_query_to_json(q);
        if (!record.empty()) out["record"] = record;
        std::cout << out.dump(2) << "\n";
      } else {
        std::cout << (q.text.empty() ? q.name : q.text) << "\n";
        std::cout << "answer: " << yes_no(v.answer) << (v.respected ? " (green)" : " (red)") << "\n";
        std::cout << "states explored: " << v.states_explored << "\n";
        print_witness(v);
        if (!record.empty()) std::cout << "record: " << record << "\n";
      }
      return 0;
    }
    if (*table) {
      const auto s = pilot::load_scenario(table_scenario);
      const auto r = pilot::run_table(s);
      std::string record;
      if (auto dir = store_dir(store_flag)) {
        pilot::Store(*dir).save_record(r);
        record = pilot::record_id(r);
      }
      if (format == Format::kJson) {
        std::cout << pilot::record_to_json(r).dump(2) << "\n";
      } else {
        print_table(r);
        if (!record.empty()) std::cout << "record: " << record << "\n";
      }
      return 0;
    }
    if (*serve) {
      auto dir = store_dir(store_flag);
      if (!dir) {
        std::cerr << "serve: no store directory (use --store or set PILOT_STORE)\n";
        return 2;
      }
      const pilot::Service service{pilot::Store(*dir)};
      httplib::Server svr;
      auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
      };
      svr.Get(R"(/.*)", handler);
      svr.Post(R"(/.*)", handler);
      std::cerr << "listening on " << host << ":" << port << ", store " << dir->string() << "\n";
      if (!svr.listen(host, port)) {
        std::cerr << "serve: cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const pilot::Error& e) {
    if (format == Format::kJson) {
      std::cerr << pilot::error_body(e).dump() << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
  }
  return 2;
}
