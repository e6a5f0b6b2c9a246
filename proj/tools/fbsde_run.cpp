#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fbsde/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cascade, simulation, lattice, mean-field and clearing runs from a JSON config"};
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  app.add_option("config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.set_version_flag("--version", FBSDE_VERSION);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fbsde::kExitConfig;
  }

  fbsde::set_worker_count(threads);
  fbsde::RunConfig config;
  try {
    config = fbsde::load_config(config_path);
    if (seed || out_dir) config = fbsde::apply_overrides(config, seed, out_dir);
  } catch (const fbsde::Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    // Without a valid config the error record goes to --out, if given.
    if (out_dir) {
      std::error_code ec;
      std::filesystem::create_directories(*out_dir, ec);
      try {
        fbsde::write_json((std::filesystem::path(*out_dir) / "error.json").string(), fbsde::error_record(e));
      } catch (const fbsde::Error&) {
      }
    }
    return fbsde::exit_code_for(e.code());
  }
  return fbsde::run(config);
}
