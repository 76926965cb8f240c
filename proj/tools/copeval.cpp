// copeval: oracle reports, seeded runs and parameter sweeps for off-policy evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "copeval/errors.hpp"
#include "copeval/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw copeval::ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw copeval::ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  // "0,1,2" or "0-9" or a mix.
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
      } else {
        const auto lo = std::stoull(item.substr(0, dash)), hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw copeval::ConfigError("bad seed range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::invalid_argument&) {
      throw copeval::ConfigError("bad seed list '" + text + "'");
    }
  }
  if (seeds.empty()) throw copeval::ConfigError("empty seed list");
  return seeds;
}

int resolve_workers(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("COP_EVAL_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  return 1;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw copeval::ConfigError("cannot open '" + path + "' for writing");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistent off-policy evaluation toolkit"};
  app.require_subcommand(1);

  std::string env_path, config_path, out_path, seed_list, format = "text", preset;
  int workers = 0;

  auto* report = app.add_subcommand("oracle-report", "Print oracle quantities for a tabular environment");
  report->add_option("env", env_path, "Environment JSON file")->required();
  report->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  report->add_option("--out", out_path, "Output file (default stdout)");

  auto* run = app.add_subcommand("run", "Run an experiment and write its CSV record");
  run->add_option("config", config_path, "Experiment JSON file")->required();
  run->add_option("--seed-list", seed_list, "Seeds, e.g. 0-9 or 1,4,7");
  run->add_option("--out", out_path, "CSV path (default: config output, else stdout)");
  run->add_option("--workers", workers, "Worker threads (default COP_EVAL_WORKERS or 1)");

  auto* sw = app.add_subcommand("sweep", "Run a grid of learner parameters");
  sw->add_option("config", config_path, "Experiment JSON file with a 'grid' object")->required();
  sw->add_option("--seed-list", seed_list, "Seeds, e.g. 0-9 or 1,4,7");
  sw->add_option("--out", out_path, "Output directory (per-cell CSVs and summary.json)")->required();
  sw->add_option("--workers", workers, "Worker threads (default COP_EVAL_WORKERS or 1)");

  auto* exp = app.add_subcommand("export-mdp", "Write a preset tabular environment as JSON");
  exp->add_option("env-id", preset, "chain-100, chain-30, random-32 or random-256")->required();
  exp->add_option("--out", out_path, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*report) {
      const json r = copeval::oracle_report(load_json(env_path));
      write_text(out_path, format == "json" ? r.dump(2) + "\n" : copeval::oracle_report_text(r));
    } else if (*run) {
      copeval::ExperimentConfig cfg = copeval::parse_experiment(load_json(config_path));
      if (!seed_list.empty()) cfg.seeds = parse_seed_list(seed_list);
      cfg.workers = resolve_workers(workers);
      const copeval::RunRecord record = copeval::run_experiment(cfg);
      const std::string path = out_path.empty() ? cfg.output : out_path;
      if (path.empty() || path == "-") {
        copeval::write_csv(record, std::cout);
      } else {
        copeval::write_csv(record, path);
      }
      for (const auto& f : record.failures) std::cerr << "failure: " << f << '\n';
      return record.partial() ? 3 : 0;
    } else if (*sw) {
      const json raw = load_json(config_path);
      copeval::ExperimentConfig cfg = copeval::parse_experiment(raw);
      if (!seed_list.empty()) cfg.seeds = parse_seed_list(seed_list);
      const auto grid = copeval::parse_grid(raw.contains("grid") ? raw.at("grid") : json::object());
      const copeval::SweepResult result = copeval::sweep(cfg, grid, resolve_workers(workers));
      fs::create_directories(out_path);
      for (std::size_t i = 0; i < result.cells.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "cell_%03zu.csv", i);
        copeval::write_csv(result.cells[i].record, (fs::path(out_path) / name).string());
      }
      write_text((fs::path(out_path) / "summary.json").string(), result.summary().dump(2) + "\n");
      if (result.best) std::cout << "best: " << result.cells[*result.best].key << '\n';
      return result.best ? 0 : 3;
    } else if (*exp) {
      write_text(out_path, copeval::export_mdp(preset).dump() + "\n");
    }
  } catch (const copeval::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
