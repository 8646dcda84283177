// lettuce_bnode: simulate greenhouse scenarios, train the Bayesian neural ODE,
// and forecast with confidence bands.
//
//   lettuce_bnode simulate --config run.json --out out/
//   lettuce_bnode train    --config run.json --out out/
//   lettuce_bnode forecast --config run.json --out out/ [--checkpoint out/checkpoint.json]
//   lettuce_bnode evaluate --config run.json --out out/ --seed 7 --serial

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lettuce/errors.hpp"
#include "lettuce/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  bool serial = false;
};

lettuce::RunConfig resolve(const Options& o) {
  lettuce::RunConfig c =
      o.config.empty() ? lettuce::RunConfig{} : lettuce::load_run_config(o.config);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON run configuration (defaults if omitted)");
  cmd->add_option("--out", o.out, "output directory (overrides config.output_dir)");
  cmd->add_option("--seed", o.seed, "root seed (overrides config.seed)");
  cmd->add_flag("--serial", o.serial, "force single-threaded execution");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greenhouse Bayesian neural ODE: simulate, train, forecast"};
  app.require_subcommand(1);

  Options o;
  auto* simulate = app.add_subcommand("simulate", "generate training scenarios");
  auto* train = app.add_subcommand("train", "fit the Bayesian network on derivative targets");
  auto* forecast = app.add_subcommand("forecast", "ensemble forecast of the held-out scenario");
  auto* evaluate = app.add_subcommand("evaluate", "run the whole pipeline and write a report");
  for (auto* cmd : {simulate, train, forecast, evaluate}) add_common(cmd, o);
  forecast->add_option("--checkpoint", o.checkpoint,
                       "checkpoint to load (default <out>/checkpoint.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    lettuce::force_serial(o.serial);
    const lettuce::RunConfig config = resolve(o);

    if (*simulate) {
      const auto scenarios = lettuce::cmd_simulate(config);
      std::cout << "wrote " << scenarios.size() << " scenarios to "
                << (config.output_dir / "scenarios").string() << '\n';
    } else if (*train) {
      const auto out = lettuce::cmd_train(config);
      const auto& h = out.history;
      std::cout << "trained " << h.epochs() << " epochs";
      if (h.epochs() > 0)
        std::cout << ", data loss " << h.data_loss.front() << " -> " << h.data_loss.back()
                  << ", active parameters " << out.checkpoint.net.active_count() << "/"
                  << out.checkpoint.net.layout.parameter_count();
      std::cout << '\n';
    } else if (*forecast) {
      const auto path = o.checkpoint.empty() ? config.output_dir / "checkpoint.json"
                                             : std::filesystem::path(o.checkpoint);
      const auto out = lettuce::cmd_forecast(config, path);
      std::cout << "forecast " << out.ensemble.horizon() << " steps x "
                << out.ensemble.members() << " members; metrics in "
                << (config.output_dir / "metrics.json").string() << '\n';
    } else if (*evaluate) {
      const auto report = lettuce::cmd_evaluate(config);
      std::cout << report["forecast"].dump(2) << '\n';
    }
  } catch (const lettuce::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
