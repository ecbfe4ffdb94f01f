// Command-line front end: run, bounds, localizability, synth.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "swarmloc/swarmloc.hpp"

namespace {

namespace fs = std::filesystem;
using namespace swarmloc;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool need_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "Configuration file");
  if (need_config) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", c.out, "Output directory (overrides the config)");
}

ExperimentConfig resolve(const Common& c) {
  auto cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

int cmd_run(const Common& c) {
  const auto result = run(resolve(c));
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& f : result.files) std::cout << f << '\n';
  return kOk;
}

int cmd_bounds(const Common& c, std::optional<std::size_t> top) {
  auto cfg = resolve(c);
  if (top) {
    cfg.top_n = *top;
    cfg.home_isps.clear();
  }
  std::vector<std::string> files;
  bounds_sweep(cfg, &files);
  for (const auto& f : files) std::cout << f << '\n';
  return kOk;
}

std::vector<double> parse_sweep(const std::string& s) {
  const auto parts = text::split(s, ':');
  if (parts.size() != 3) throw validation_error("--sweep expects lo:hi:steps");
  auto lo = text::to_double(parts[0]);
  auto hi = text::to_double(parts[1]);
  auto steps = text::to_int(parts[2]);
  if (!lo || !hi || !steps || *steps < 1) throw validation_error("--sweep expects lo:hi:steps");
  return linear_grid(*lo, *hi, static_cast<std::size_t>(*steps));
}

int cmd_localizability(const Common& c, const std::string& isp, std::optional<double> q,
                       const std::string& sweep) {
  const auto cfg = resolve(c);
  const auto data = prepare_data(cfg);
  const double band = q.value_or(cfg.q);
  std::vector<double> grid = sweep.empty() ? std::vector<double>{data.speeds.isp_speed(isp)} : parse_sweep(sweep);
  const auto curve = speed_sweep(data.dataset, data.speeds, isp, band, grid);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    const auto path = fs::path(c.out) / "localizability.csv";
    file.open(path);
    if (!file) throw std::runtime_error("cannot write '" + path.string() + "'");
    out = &file;
  }
  *out << "speed_kbps,localizability\n";
  for (const auto& [speed, value] : curve) *out << text::fixed(speed, 3) << ',' << text::fixed(value) << '\n';
  return kOk;
}

int cmd_synth(const Common& c) {
  const auto cfg = resolve(c);
  if (!cfg.synthetic) throw validation_error("synth needs a [synthetic] section");
  const auto world = generate_world(*cfg.synthetic, cfg.seed);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  auto write = [&](const char* name, auto&& fn) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    fn(f);
    std::cout << (dir / name).string() << '\n';
  };
  write("demographics.csv", [&](std::ostream& o) { write_demographics(o, world.dataset); });
  write("speeds.csv", [&](std::ostream& o) { write_speed_table(o, world.speeds); });
  write("ratios.csv", [&](std::ostream& o) { write_ratios(o, world.ratios); });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locality-biased peer selection analysis for BitTorrent swarms"};
  app.require_subcommand(1);

  Common run_c, bounds_c, loc_c, synth_c;
  auto* run_cmd = app.add_subcommand("run", "Evaluate overlay policies against Random");
  add_common(run_cmd, run_c);

  auto* bounds_cmd = app.add_subcommand("bounds", "Speed-agnostic localized-unchoke bounds per ISP");
  add_common(bounds_cmd, bounds_c);
  std::optional<std::size_t> top;
  bounds_cmd->add_option("--top", top, "Number of largest ISPs to report");

  auto* loc_cmd = app.add_subcommand("localizability", "Inherent localizability of an ISP");
  add_common(loc_cmd, loc_c);
  std::string isp, sweep;
  std::optional<double> q;
  loc_cmd->add_option("--isp", isp, "Home ISP")->required();
  loc_cmd->add_option("--q", q, "Speed band half-width in [0,1]");
  loc_cmd->add_option("--sweep", sweep, "Speed grid lo:hi:steps in kbps");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  add_common(synth_cmd, synth_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*run_cmd) return cmd_run(run_c);
    if (*bounds_cmd) return cmd_bounds(bounds_c, top);
    if (*loc_cmd) return cmd_localizability(loc_c, isp, q, sweep);
    if (*synth_cmd) return cmd_synth(synth_c);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
