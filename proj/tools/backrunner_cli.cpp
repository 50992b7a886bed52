// Command-line front end: inspect worlds, synthesize counter-exploits, run
// corpus scenarios end to end, and reproduce the bidding-war experiment.
//
// Exit codes: 0 success, 1 the requested stage ran but failed (no programs,
// nothing profitable, not an attack), 2 bad input.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "backrunner/corpus.hpp"
#include "backrunner/pipeline.hpp"

using namespace backrunner;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kStageFailure = 1, kBadInput = 2;

struct GlobalOpts {
  uint64_t seed = 1;
  unsigned workers = 1;
  std::string world_path;
  std::string out_path;
};

void add_globals(CLI::App* cmd, GlobalOpts& g) {
  cmd->add_option("--seed", g.seed, "random seed for search stages");
  cmd->add_option("--workers", g.workers, "fuzzing worker threads");
  cmd->add_option("--world", g.world_path, "world state JSON file");
  cmd->add_option("--out", g.out_path, "write output here instead of stdout");
}

int emit(const GlobalOpts& g, const std::string& content) {
  if (g.out_path.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    return kOk;
  }
  std::ofstream f(g.out_path, std::ios::binary);
  if (!f) {
    std::cerr << "cannot write " << g.out_path << "\n";
    return kBadInput;
  }
  f << content;
  return kOk;
}

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::optional<json> load_json(const std::string& path) {
  auto text = slurp(path);
  if (!text) return std::nullopt;
  json j = json::parse(*text, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

// nullopt => diagnostic already printed, caller should exit kBadInput
std::optional<minivm::WorldState> load_world(const GlobalOpts& g) {
  if (g.world_path.empty()) {
    std::cerr << "--world <file> is required\n";
    return std::nullopt;
  }
  auto j = load_json(g.world_path);
  if (!j) {
    std::cerr << "cannot read world file " << g.world_path << "\n";
    return std::nullopt;
  }
  auto w = chainsim::world_from_json(*j);
  if (!w) {
    std::cerr << "malformed world file " << g.world_path << "\n";
    return std::nullopt;
  }
  return w;
}

std::optional<Address> parse_address(const std::string& s) {
  auto w = word_from_hex(s);
  if (!w || (*w >> 160) != 0) return std::nullopt;
  return to_address(*w);
}

pipeline::PipelineConfig pipeline_config(const GlobalOpts& g) {
  pipeline::PipelineConfig cfg;
  cfg.seed = g.seed;
  cfg.workers = g.workers;
  return cfg;
}

json hole_json(const prog::Hole& h) {
  json hj;
  hj["action"] = h.action_index;
  hj["arg"] = h.arg_index;
  hj["type"] = h.type.to_string();
  hj["open"] = h.rule.kind == prog::RuleFill::Kind::None;
  if (h.filled) hj["filled"] = to_hex(h.filled_word());
  return hj;
}

json program_json(const prog::ProgramWithHoles& p) {
  json pj;
  pj["provenance"] = p.provenance == prog::ProgramWithHoles::Provenance::Hijack ? "hijack" : "backrun";
  if (p.provenance == prog::ProgramWithHoles::Provenance::Hijack) {
    pj["target"] = to_hex(p.target);
    pj["selector"] = p.function.is_fallback ? "fallback" : to_hex(Word(p.function.selector));
    pj["decisions"] = p.decisions.size();
  } else {
    pj["actions"] = p.actions.size();
  }
  size_t open = 0;
  pj["holes"] = json::array();
  for (auto& h : p.holes) {
    pj["holes"].push_back(hole_json(h));
    if (h.rule.kind == prog::RuleFill::Kind::None) open++;
  }
  pj["open_holes"] = open;
  return pj;
}

int cmd_funcx_dump(const GlobalOpts& g, const std::string& hex_file) {
  auto text = slurp(hex_file);
  if (!text) {
    std::cerr << "cannot read " << hex_file << "\n";
    return kBadInput;
  }
  std::string trimmed;
  for (char c : *text)
    if (!isspace(static_cast<unsigned char>(c))) trimmed += c;
  auto code = from_hex(trimmed);
  if (!code) {
    std::cerr << "not a hex bytecode file: " << hex_file << "\n";
    return kBadInput;
  }
  std::ostringstream out;
  for (auto& f : funcx::extract_funcs(*code)) {
    if (f.is_fallback) {
      out << "fallback() entry=" << f.entry_pc << "\n";
      continue;
    }
    out << to_hex(Word(f.selector)) << "(";
    for (size_t i = 0; i < f.args.size(); ++i) out << (i ? "," : "") << f.args[i].to_string();
    out << ") entry=" << f.entry_pc << "\n";
  }
  return emit(g, out.str());
}

int cmd_hijack(const GlobalOpts& g, const std::string& addr_s, bool do_rewrite) {
  auto world = load_world(g);
  if (!world) return kBadInput;
  auto addr = parse_address(addr_s);
  if (!addr) {
    std::cerr << "bad address " << addr_s << "\n";
    return kBadInput;
  }
  auto cfg = pipeline_config(g);
  auto clone = hijack::clone_exploit(*world, *addr, cfg.path_caps, cfg.whitehat);
  json out;
  out["contract"] = to_hex(*addr);
  out["truncated"] = clone.truncated;
  out["programs"] = json::array();
  for (auto& p : clone.programs) {
    auto q = do_rewrite ? rewrite::rewrite_program(*world, p, cfg.whitehat) : p;
    out["programs"].push_back(program_json(q));
  }
  int rc = emit(g, out.dump(2));
  if (rc != kOk) return rc;
  return clone.programs.empty() ? kStageFailure : kOk;
}

std::optional<minivm::Message> message_from_json(const json& j) {
  minivm::Message m;
  if (!j.contains("from")) return std::nullopt;
  auto from = parse_address(j.at("from").get<std::string>());
  if (!from) return std::nullopt;
  m.caller = *from;
  m.origin = *from;
  if (j.contains("to")) {
    auto to = parse_address(j.at("to").get<std::string>());
    if (!to) return std::nullopt;
    m.target = *to;
  }
  if (j.contains("value")) {
    auto v = word_from_hex(j.at("value").get<std::string>());
    if (!v) return std::nullopt;
    m.value = *v;
  }
  if (j.contains("calldata")) {
    auto d = from_hex(j.at("calldata").get<std::string>());
    if (!d) return std::nullopt;
    m.calldata = *d;
  }
  return m;
}

int cmd_backrun(const GlobalOpts& g, const std::string& tx_file) {
  auto world = load_world(g);
  if (!world) return kBadInput;
  auto j = load_json(tx_file);
  if (!j) {
    std::cerr << "cannot read transaction file " << tx_file << "\n";
    return kBadInput;
  }
  auto msg = message_from_json(*j);
  if (!msg) {
    std::cerr << "malformed transaction file " << tx_file << "\n";
    return kBadInput;
  }
  auto cfg = pipeline_config(g);
  pipeline::Event ev;
  ev.kind = pipeline::Event::Kind::AttackConfirmed;
  ev.pre = *world;
  ev.attack = *msg;
  // searching against the post-attack state mirrors the live pipeline
  auto res = minivm::execute(*world, *msg);
  auto post = res.outcome == minivm::Outcome::Success ? res.world : *world;
  auto po = pipeline::run_opportunity(post, ev, cfg);
  int rc = emit(g, pipeline::report_to_json(po.report, true).dump(2));
  if (rc != kOk) return rc;
  return po.report.submitted ? kOk : kStageFailure;
}

int cmd_fuzz(const GlobalOpts& g, const std::string& addr_s) {
  auto world = load_world(g);
  if (!world) return kBadInput;
  auto addr = parse_address(addr_s);
  if (!addr) {
    std::cerr << "bad address " << addr_s << "\n";
    return kBadInput;
  }
  pipeline::Event ev;
  ev.kind = pipeline::Event::Kind::ContractCreated;
  ev.contract = *addr;
  auto po = pipeline::run_opportunity(*world, ev, pipeline_config(g));
  int rc = emit(g, pipeline::report_to_json(po.report, true).dump(2));
  if (rc != kOk) return rc;
  return po.report.submitted ? kOk : kStageFailure;
}

int cmd_traits(const GlobalOpts& g, const std::string& addr_s, bool selectors) {
  auto world = load_world(g);
  if (!world) return kBadInput;
  auto addr = parse_address(addr_s);
  if (!addr) {
    std::cerr << "bad address " << addr_s << "\n";
    return kBadInput;
  }
  auto index = traits::SimilarityIndex::build(*world);
  auto mode = selectors ? traits::TraitMode::Selectors : traits::TraitMode::Codehash;
  json out;
  out["contract"] = to_hex(*addr);
  out["mode"] = selectors ? "selectors" : "codehash";
  out["similar"] = json::array();
  for (auto& a : index.query_similar(*addr, mode))
    if (a != *addr) out["similar"].push_back(to_hex(a));
  return emit(g, out.dump(2));
}

int cmd_bid_sim(const GlobalOpts& g, const std::string& cfg_file) {
  auto j = load_json(cfg_file);
  if (!j) {
    std::cerr << "cannot read bidding config " << cfg_file << "\n";
    return kBadInput;
  }
  chainsim::BidSimConfig cfg;
  try {
    if (j->contains("rescuable")) cfg.rescuable = Word(j->at("rescuable").get<uint64_t>());
    if (j->contains("gas_used")) cfg.gas_used = j->at("gas_used").get<uint64_t>();
    if (j->contains("floor_price")) cfg.floor_price = Word(j->at("floor_price").get<uint64_t>());
    if (j->contains("burn_bps")) cfg.burn_bps = Word(j->at("burn_bps").get<uint64_t>());
    if (j->contains("bots")) {
      for (auto& b : j->at("bots")) {
        chainsim::Bot bot;
        bot.cap = Word(b.at("cap").get<uint64_t>());
        if (b.contains("private")) bot.uses_private = b.at("private").get<bool>();
        cfg.bots.push_back(bot);
      }
    }
  } catch (const json::exception&) {
    std::cerr << "malformed bidding config " << cfg_file << "\n";
    return kBadInput;
  }
  auto r = chainsim::simulate_bidding(cfg);
  int rc = emit(g, chainsim::bid_log_csv(r));
  if (rc != kOk) return rc;
  std::cerr << "winner=" << (r.winner == size_t(-1) ? std::string("none") : std::to_string(r.winner))
            << " gas_price=" << r.winner_price.str()
            << " rescued_fraction=" << r.rescued_fraction << "\n";
  return kOk;
}

std::optional<corpus::Scenario> load_scenario(const std::string& ref) {
  if (auto j = load_json(ref)) return corpus::scenario_from_json(*j);
  return corpus::build(ref);  // fall back to a built-in name
}

int cmd_scenario_run(const GlobalOpts& g, const std::string& ref) {
  auto s = load_scenario(ref);
  if (!s) {
    std::cerr << "unknown scenario " << ref << " (not a file or built-in name)\n";
    return kBadInput;
  }
  auto r = pipeline::run_scenario(*s, pipeline_config(g));
  int rc = emit(g, pipeline::result_to_json(r).dump(2));
  if (rc != kOk) return rc;
  if (!s->defensible) return kOk;  // reported failure is the expected outcome
  bool rescued = false;
  for (auto& rep : r.reports) rescued |= rep.submitted;
  return rescued ? kOk : kStageFailure;
}

int cmd_scenario_list(const GlobalOpts& g) {
  std::string out;
  for (auto& n : corpus::names()) {
    auto s = corpus::build(n);
    out += n + "\t" + (s ? s->summary : "") + "\n";
  }
  return emit(g, out);
}

int cmd_scenario_export(const GlobalOpts& g, const std::string& name) {
  auto s = corpus::build(name);
  if (!s) {
    std::cerr << "unknown scenario " << name << "\n";
    return kBadInput;
  }
  return emit(g, corpus::scenario_to_json(*s).dump(2));
}

int cmd_report(const GlobalOpts& g, const std::string& file) {
  auto j = load_json(file);
  if (!j) {
    std::cerr << "cannot read report file " << file << "\n";
    return kBadInput;
  }
  std::ostringstream out;
  try {
    out << "scenario: " << j->value("scenario", std::string("?")) << "\n";
    out << "blocks: " << j->value("blocks", 0) << "  rescue bundles: "
        << j->value("rescue_bundles", 0) << "  whitehat profit: "
        << j->value("whitehat_profit", std::string("0")) << "\n";
    for (auto& rep : j->value("reports", json::array())) {
      out << "- opportunity " << rep.value("opportunity_id", 0) << " [" << rep.value("strategy", std::string("?"))
          << "] programs=" << rep.value("programs_generated", 0) << " holes " << rep.value("holes_before", 0)
          << "->" << rep.value("holes_after", 0) << " profit=" << rep.value("profit", std::string("0"))
          << (rep.value("submitted", false) ? " SUBMITTED" : " not submitted") << "\n";
      for (auto& st : rep.value("stages", json::array())) {
        out << "    " << st.value("stage", std::string("?")) << ": "
            << (st.value("ok", false) ? "ok" : "failed");
        auto note = st.value("note", std::string());
        if (!note.empty()) out << " (" << note << ")";
        out << "\n";
      }
    }
  } catch (const json::exception&) {
    std::cerr << "malformed report file " << file << "\n";
    return kBadInput;
  }
  return emit(g, out.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counter-exploit synthesis against a simulated chain"};
  app.require_subcommand(1);
  GlobalOpts g;

  std::string addr_s, file_s, name_s;
  bool selectors = false, no_rewrite = false;

  auto* c_hijack = app.add_subcommand("hijack", "clone a deployed exploit and summarize programs");
  c_hijack->add_option("address", addr_s, "exploit contract address")->required();
  c_hijack->add_flag("--no-rewrite", no_rewrite, "skip rule-based hole closing");
  add_globals(c_hijack, g);

  auto* c_backrun = app.add_subcommand("backrun", "reconstruct an observed attack and synthesize a counter");
  c_backrun->add_option("tx", file_s, "attack transaction JSON file")->required();
  add_globals(c_backrun, g);

  auto* c_fuzz = app.add_subcommand("fuzz", "full hijack search against a deployed contract");
  c_fuzz->add_option("address", addr_s, "contract address")->required();
  add_globals(c_fuzz, g);

  auto* c_traits = app.add_subcommand("traits", "list trait-similar contracts");
  c_traits->add_option("address", addr_s, "contract address")->required();
  c_traits->add_flag("--selectors", selectors, "match by selector set instead of codehash");
  add_globals(c_traits, g);

  auto* c_bid = app.add_subcommand("bid-sim", "simulate a gas-price bidding war, emit a CSV log");
  c_bid->add_option("config", file_s, "bidding config JSON file")->required();
  add_globals(c_bid, g);

  auto* c_scn = app.add_subcommand("scenario", "built-in scenario corpus");
  c_scn->require_subcommand(1);
  auto* c_run = c_scn->add_subcommand("run", "run a scenario with the defense attached");
  c_run->add_option("scenario", name_s, "scenario JSON file or built-in name")->required();
  add_globals(c_run, g);
  auto* c_list = c_scn->add_subcommand("list", "list built-in scenarios");
  add_globals(c_list, g);
  auto* c_export = c_scn->add_subcommand("export", "print a built-in scenario as JSON");
  c_export->add_option("name", name_s, "built-in scenario name")->required();
  add_globals(c_export, g);

  auto* c_report = app.add_subcommand("report", "pretty-print a scenario run report");
  c_report->add_option("file", file_s, "report JSON file")->required();
  add_globals(c_report, g);

  auto* c_funcx = app.add_subcommand("funcx", "bytecode function analysis");
  c_funcx->require_subcommand(1);
  auto* c_dump = c_funcx->add_subcommand("dump", "print extracted function descriptors");
  c_dump->add_option("hex-file", file_s, "file holding hex bytecode")->required();
  add_globals(c_dump, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  if (*c_hijack) return cmd_hijack(g, addr_s, !no_rewrite);
  if (*c_backrun) return cmd_backrun(g, file_s);
  if (*c_fuzz) return cmd_fuzz(g, addr_s);
  if (*c_traits) return cmd_traits(g, addr_s, selectors);
  if (*c_bid) return cmd_bid_sim(g, file_s);
  if (*c_run) return cmd_scenario_run(g, name_s);
  if (*c_list) return cmd_scenario_list(g);
  if (*c_export) return cmd_scenario_export(g, name_s);
  if (*c_report) return cmd_report(g, file_s);
  if (*c_dump) return cmd_funcx_dump(g, file_s);
  return kBadInput;
}
