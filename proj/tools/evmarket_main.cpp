// Command-line front end: scenario ingestion, command dispatch, report
// emission. One logical command per process invocation; everything is
// deterministic given (scenario bytes, command, flags, seed).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evmarket/evmarket.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string scenario_path;
  std::string format = "json";
  std::string out = "-";
};

struct LoadedScenario {
  evmarket::Scenario scenario;
  std::string digest;
};

LoadedScenario read_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) evmarket::fail(evmarket::errc::io, "cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return {evmarket::parse_scenario(bytes), evmarket::scenario_digest(bytes)};
}

void emit(const CommonOpts& opts, const std::string& text) {
  if (opts.out == "-")
    std::cout << text;
  else
    evmarket::write_text(opts.out, text);
}

std::string command_echo(const std::string& cmd, const std::vector<std::string>& flags) {
  std::string echo = cmd;
  for (const auto& f : flags) echo += " " + f;
  return echo;
}

void emit_report(const CommonOpts& opts, const std::string& echo, const std::string& digest,
                 json result) {
  evmarket::Report rep{echo, digest, evmarket::kToolVersion, std::move(result)};
  emit(opts, evmarket::to_json(rep).dump(2) + "\n");
}

// Subsidy field, when present, acts as applied policy for the single-shot
// commands; params/cost handed to them are already shifted.
struct Effective {
  evmarket::ChoiceParams params;
  evmarket::CostModel cost;
};

Effective effective_of(const evmarket::Scenario& sc) {
  Effective eff{sc.params, sc.cost};
  if (sc.subsidy) {
    eff.params = evmarket::apply_subsidy(eff.params, *sc.subsidy);
    eff.cost = evmarket::apply_subsidy(eff.cost, *sc.subsidy);
  }
  return eff;
}

const std::vector<double> kDefaultVGrid = {1e2, 1e4, 1e6, 1e8, 1e10, 1e12};

int run_price(const CommonOpts& opts) {
  auto [sc, digest] = read_scenario(opts.scenario_path);
  const auto eff = effective_of(sc);
  evmarket::PricingSolution sol;
  if (sc.sites.count() == 0) {
    sol = evmarket::PricingSolution::no_stations(eff.params);
  } else {
    const double v = evmarket::aggregate_v(sc.sites.sites, eff.params);
    sol = evmarket::solve_uniform_profit(v, eff.params, sc.solver);
  }
  json result;
  result["pricing"] = evmarket::to_json(sol);
  result["prices"] = evmarket::price_vector(sc.sites.sites, sol.r);
  emit_report(opts, command_echo("price", {"--scenario", opts.scenario_path}), digest,
              std::move(result));
  return 0;
}

int run_invest(const CommonOpts& opts, bool oracle) {
  auto [sc, digest] = read_scenario(opts.scenario_path);
  const auto eff = effective_of(sc);
  json result;
  result["greedy"] = evmarket::to_json(
      evmarket::greedy_select(sc.sites, eff.params, eff.cost, sc.solver));
  if (oracle)
    result["oracle"] = evmarket::to_json(
        evmarket::brute_force_select(sc.sites, eff.params, eff.cost, sc.solver));
  std::vector<std::string> flags = {"--scenario", opts.scenario_path};
  if (oracle) flags.push_back("--oracle");
  emit_report(opts, command_echo("invest", flags), digest, std::move(result));
  return 0;
}

int run_welfare(const CommonOpts& opts, const char* name) {
  auto [sc, digest] = read_scenario(opts.scenario_path);
  const auto eff = effective_of(sc);
  const auto rep = evmarket::compare_market_vs_planner(sc.sites, eff.params, eff.cost, sc.solver);
  emit_report(opts, command_echo(name, {"--scenario", opts.scenario_path}), digest,
              evmarket::to_json(rep));
  return 0;
}

int run_subsidy(const CommonOpts& opts) {
  auto [sc, digest] = read_scenario(opts.scenario_path);
  // The sweep is always relative to the unsubsidized scenario; the scenario's
  // subsidy block, when present, sets the grid ceiling.
  const double se_max = sc.subsidy ? sc.subsidy->ev_subsidy : 2.0;
  const double sig_max = sc.subsidy ? sc.subsidy->capital_subsidy : 0.8;
  constexpr int kSteps = 5;
  std::vector<evmarket::SubsidySetting> grid;
  for (int i = 0; i < kSteps; ++i)
    for (int j = 0; j < kSteps; ++j)
      grid.push_back({se_max * i / (kSteps - 1), sig_max * j / (kSteps - 1)});
  const auto rows = evmarket::subsidy_sweep(sc.sites, sc.params, sc.cost, grid, sc.solver);
  if (opts.format == "csv") {
    emit(opts, evmarket::sweep_csv(rows));
  } else {
    json jrows = json::array();
    for (const auto& row : rows) jrows.push_back(evmarket::to_json(row));
    emit_report(opts, command_echo("subsidy", {"--scenario", opts.scenario_path}), digest,
                json{{"rows", std::move(jrows)}});
  }
  return 0;
}

int run_simulate(const CommonOpts& opts, std::uint64_t seed, std::uint64_t samples) {
  auto [sc, digest] = read_scenario(opts.scenario_path);
  const auto eff = effective_of(sc);
  const auto plan = evmarket::greedy_select(sc.sites, eff.params, eff.cost, sc.solver);
  const auto sim = evmarket::simulate_consumers(plan, eff.params, samples, seed);
  const auto analytic = plan.deferred ? evmarket::PricingSolution::no_stations(eff.params)
                                      : *plan.pricing;
  std::vector<double> station_vs;
  for (const auto& site : plan.selected)
    station_vs.push_back(evmarket::exp_systematic_utility(site, eff.params));
  const auto validation = evmarket::validate_closed_form(sim, analytic, station_vs, eff.params);
  json result;
  result["plan"] = evmarket::to_json(plan);
  result["simulation"] = evmarket::to_json(sim);
  result["validation"] = evmarket::to_json(validation);
  emit_report(opts,
              command_echo("simulate", {"--scenario", opts.scenario_path, "--seed",
                                        std::to_string(seed), "--samples",
                                        std::to_string(samples)}),
              digest, std::move(result));
  return 0;
}

int run_asymptote(const CommonOpts& opts) {
  auto [sc, digest] = read_scenario(opts.scenario_path);
  const auto eff = effective_of(sc);
  const auto rows = evmarket::asymptotic_diagnostics(kDefaultVGrid, eff.params, sc.solver);
  if (opts.format == "csv") {
    emit(opts, evmarket::diagnostics_csv(rows));
  } else {
    json jrows = json::array();
    for (const auto& row : rows) jrows.push_back(evmarket::to_json(row));
    const auto vbar1 = evmarket::detect_vbar1(kDefaultVGrid, eff.params, sc.solver);
    json result{{"rows", std::move(jrows)}};
    result["vbar1"] = vbar1 ? json(*vbar1) : json(nullptr);
    emit_report(opts, command_echo("asymptote", {"--scenario", opts.scenario_path}), digest,
                std::move(result));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-sided EV / charging-station market equilibrium engine"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool oracle = false;
  std::uint64_t seed = 1;
  std::uint64_t samples = 1000000;

  auto add_common = [&](CLI::App* cmd, bool tabular) {
    cmd->add_option("--scenario", opts.scenario_path, "scenario file (JSON, // comments allowed)")
        ->required();
    cmd->add_option("--format", opts.format, tabular ? "json|csv" : "json")
        ->check(CLI::IsMember(tabular ? std::vector<std::string>{"json", "csv"}
                                      : std::vector<std::string>{"json"}));
    cmd->add_option("--out", opts.out, "output path ('-' for stdout)");
    return cmd;
  };

  auto* price = add_common(app.add_subcommand("price", "uniform-profit equilibrium at the scenario's sites"), false);
  auto* invest = add_common(app.add_subcommand("invest", "greedy investment plan"), false);
  invest->add_flag("--oracle", oracle, "also run the brute-force subset oracle");
  auto* planner = add_common(app.add_subcommand("planner", "market vs. social-planner comparison"), false);
  auto* welfare = add_common(app.add_subcommand("welfare", "market vs. social-planner comparison"), false);
  auto* subsidy = add_common(app.add_subcommand("subsidy", "subsidy scenario sweep"), true);
  auto* simulate = add_common(app.add_subcommand("simulate", "Monte Carlo validation of the closed forms"), false);
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--samples", samples, "number of simulated consumers");
  auto* asymptote = add_common(app.add_subcommand("asymptote", "large-v convergence diagnostics"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[args]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (price->parsed()) return run_price(opts);
    if (invest->parsed()) return run_invest(opts, oracle);
    if (planner->parsed()) return run_welfare(opts, "planner");
    if (welfare->parsed()) return run_welfare(opts, "welfare");
    if (subsidy->parsed()) return run_subsidy(opts);
    if (simulate->parsed()) return run_simulate(opts, seed, samples);
    if (asymptote->parsed()) return run_asymptote(opts);
  } catch (const evmarket::Error& e) {
    std::cerr << "error[" << evmarket::errc_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
