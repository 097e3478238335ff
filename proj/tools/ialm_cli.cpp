// Copyright 2026 The ialm Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ialm command-line tool: solve, sweep, check, gradcheck.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ialm/harness.hpp"

int main(int argc, char** argv) {
  using namespace ialm::cli;

  CLI::App app{"Inexact augmented Lagrangian experiments"};
  app.require_subcommand(1);
  std::string config_path;
  long long seed = -1;
  std::string out_path;
  std::string format;
  app.add_option("--config", config_path, "key=value config file with [sections]");
  app.add_option("--seed", seed, "random seed (overrides run.seed)");
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* solve = app.add_subcommand("solve", "run one solve and write its trace");
  CLI::App* sweep = app.add_subcommand("sweep", "oracle calls versus tau_f");
  CLI::App* check = app.add_subcommand("check", "regularity estimates and bounds");
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference derivative checks");
  for (CLI::App* sub : {solve, sweep, check, gradcheck}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    apply_environment(cfg);
    if (seed >= 0) set_value(cfg, "run.seed", std::to_string(seed));
    if (!out_path.empty()) cfg.out_path = out_path;
    if (!format.empty()) cfg.format = format;
    validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitConfigError;
  }

  if (*solve) return cmd_solve(cfg);
  if (*sweep) return cmd_sweep(cfg);
  if (*check) return cmd_check(cfg);
  return cmd_gradcheck(cfg);
}
