#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <condensim/cli.hpp>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw condensim::Error(condensim::ErrorKind::IoError, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace condensim;
  CLI::App app{"Zero-range condensation and absorbed-diffusion laboratory"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  for (const auto& name : cli::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config_path, "JSON run configuration")->required();
    sub->add_option("-o,--out", out_dir, "output directory (overrides output.directory)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::ConfigError;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  std::string seed_source = "config";
  try {
    cfg = parse_config(read_file(config_path));
    if (const char* env = std::getenv("CONDENSIM_SEED")) {
      try {
        std::size_t used = 0;
        cfg.experiment.seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error(ErrorKind::SchemaError, "CONDENSIM_SEED: expected an unsigned integer");
      }
      seed_source = "env:CONDENSIM_SEED";
    }
    if (!out_dir.empty()) cfg.output.directory = out_dir;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    cli::ManifestInfo info;
    info.subcommand = subcommand;
    info.exit_code = e.kind() == ErrorKind::IoError ? cli::RuntimeError : cli::ConfigError;
    info.error = e.what();
    try {
      cli::write_manifest(out_dir.empty() ? std::string("out") : out_dir, info, nullptr, nullptr);
    } catch (const std::exception& w) {
      std::cerr << "error: " << w.what() << '\n';
    }
    return info.exit_code;
  }
  return cli::dispatch(subcommand, cfg, std::cerr, seed_source);
}
