#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ccftl/config.hpp"
#include "ccftl/error.hpp"
#include "ccftl/pipeline.hpp"

namespace {

// 2 is reserved for usage errors reported by the argument parser.
int exit_code(ccftl::ErrorKind kind) {
  switch (kind) {
    case ccftl::ErrorKind::config: return 3;
    case ccftl::ErrorKind::missing_artifact: return 4;
    case ccftl::ErrorKind::io: return 5;
    case ccftl::ErrorKind::crypto: return 6;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-city federated transfer learning simulator"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string mode;
  app.add_option("command", command, "generate | train | transfer | evaluate | ablate | sweep | all")
      ->required()
      ->check(CLI::IsMember({"generate", "train", "transfer", "evaluate", "ablate", "sweep", "all"}));
  app.add_option("--config", config_path, "YAML experiment config (defaults apply when omitted)");
  app.add_option("--seed", seed, "Run seed; replaces the config's seed and seeds");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--mode", mode, "Aggregation mode")->check(CLI::IsMember({"plaintext", "encrypted"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto cfg = config_path.empty() ? ccftl::config::ExperimentConfig{} : ccftl::config::parse_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.seeds.clear();
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!mode.empty()) cfg.settings.mode = ccftl::fed::parse_mode(mode);
    ccftl::pipeline::run_command(command, cfg);
  } catch (const ccftl::Error& e) {
    std::cerr << "error [" << ccftl::to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
