#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slt/config.hpp"
#include "slt/errors.hpp"
#include "slt/experiment.hpp"
#include "slt/montecarlo.hpp"

namespace {

const std::map<std::string, std::string> kDescriptions{
    {"simulate", "sample paths; per-path q-norm, range, max local time"},
    {"verify-sandwich", "check the strand sandwich bounds on random paths"},
    {"estimate-gamma", "escape probability gamma_d"},
    {"estimate-kappa", "mean q-norm / n and mean range / n"},
    {"variance-scan", "variance of the q-norm across an n grid"},
    {"clt-test", "KS test of the standardized q-norm"},
    {"tail", "P(q_norm - mean >= xi n)"},
    {"pinned", "tail of the local time at the origin"},
    {"confined", "ball confinement probabilities"},
    {"intersection-scan", "mutual intersection mass with the k-visited set of a second walk"},
    {"level-profile", "q-norm contribution per dyadic level, with top-fraction conditioning"},
    {"shape-crossover", "crossover exponent and strategy costs over a d grid"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-intersection local times of lattice random walks"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::map<std::string, std::string> flag_values;
  std::vector<std::string> order;
  for (const auto& name : slt::subcommands()) {
    auto* sub = app.add_subcommand(name, kDescriptions.at(name));
    sub->add_option("-c,--config", config_path, "key = value config file");
    for (const auto& key : slt::config_keys()) {
      sub->add_option("--" + key, flag_values[key], "config key '" + key + "'");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : slt::kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();
  std::vector<slt::ConfigEntry> flags;
  for (const auto& key : slt::config_keys()) {
    if (sub->count("--" + key) > 0) flags.push_back({key, flag_values[key], "flag --" + key});
  }

  try {
    const auto config = slt::load_config(
        name, config_path ? std::optional<std::filesystem::path>(*config_path) : std::nullopt,
        flags);
    const auto result = slt::run_experiment(config);
    std::cout << result.summary;
    for (const auto& p : result.artifacts) std::cout << "wrote " << p.string() << "\n";
    std::cout << "config_hash " << config.hash() << "\n";
    return result.exit_code;
  } catch (const slt::InfeasibleConfiguration& e) {
    std::cerr << "infeasible configuration: " << e.what() << "\n";
    return slt::kExitConfig;
  } catch (const slt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return slt::kExitConfig;
  } catch (const slt::PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return slt::kExitConfig;
  } catch (const slt::CapacityError& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return slt::kExitResource;
  } catch (const slt::VerificationError& e) {
    std::cerr << "verification failure: " << e.what() << "\n";
    return slt::kExitVerification;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
