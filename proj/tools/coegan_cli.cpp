// Command-line front end: run / resume / report.

#include "coegan/harness.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// "key=value" with value parsed as JSON, falling back to a plain string.
void apply_set(json& overrides, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw coegan::ConfigError({"--set expects key=value, got " + kv});
  const std::string key = kv.substr(0, eq);
  const std::string value = kv.substr(eq + 1);
  try {
    overrides[key] = json::parse(value);
  } catch (const json::parse_error&) {
    overrides[key] = value;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coevolutionary GAN experiments"};
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> generations;
  std::optional<std::string> dataset, strategy;
  std::vector<std::string> sets;
  int repeat = 1;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "start a new experiment");
  run->add_option("--config", config_file, "JSON config file");
  run->add_option("--seed", seed);
  run->add_option("--repeat", repeat, "number of seeds, starting at --seed")->check(CLI::PositiveNumber);
  run->add_option("--dataset", dataset)->check(CLI::IsMember({"mnist", "ring"}));
  run->add_option("--strategy", strategy)->check(CLI::IsMember({"all_vs_best", "random", "all_vs_all"}));
  run->add_option("--generations", generations);
  run->add_option("--set", sets, "override any config key, e.g. --set pop_gen=5");
  run->add_option("--out", out_dir, "run directory (default runs/<dataset>_seed<seed>)");

  std::string run_dir;
  auto* resume = app.add_subcommand("resume", "continue a run from its newest checkpoint");
  resume->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);

  auto* report = app.add_subcommand("report", "re-render CSVs, plots and samples");
  report->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      json overrides = json::object();
      for (const auto& s : sets) apply_set(overrides, s);
      if (seed) overrides["seed"] = *seed;
      if (generations) overrides["generations"] = *generations;
      if (dataset) overrides["dataset"] = *dataset;
      if (strategy) overrides["strategy"] = *strategy;
      std::optional<fs::path> file;
      if (config_file) file = *config_file;
      const coegan::RunConfig cfg = coegan::parse_config(file, overrides);
      if (out_dir.empty()) out_dir = "runs/" + cfg.dataset + "_seed" + std::to_string(cfg.seed);
      const auto result = coegan::run_experiment(cfg, out_dir, repeat);
      if (result.summary)
        std::cout << "final best generator fitness over " << result.summary->runs
                  << " runs: " << result.summary->mean << " (95% CI " << result.summary->ci_low
                  << " .. " << result.summary->ci_high << ")\n";
      else if (!result.final_best.empty())
        std::cout << "final best generator fitness: " << result.final_best.front() << '\n';
    } else if (*resume) {
      const auto result = coegan::resume_experiment(run_dir);
      std::cout << "completed " << result.state.generation << " generations\n";
    } else if (*report) {
      coegan::render_report(run_dir);
    }
  } catch (const coegan::ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "config: " << p << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
