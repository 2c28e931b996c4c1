#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emclim/pipeline.hpp"

namespace emclim::cli {

// Failures surface as one machine-parseable JSON object on the diagnostic
// stream; exit codes: 0 ok, 2 config, 3 data, 4 numerical.
inline void emit_error(std::ostream& err, const std::string& category,
                       const std::string& message) {
  err << nlohmann::json{{"error", {{"category", category}, {"message", message}}}}.dump() << "\n";
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"microclimate feature extraction and energy microclimate analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag;
  std::optional<int> threads_flag;
  app.add_option("--config", config_path, "run configuration JSON");
  app.add_option("--seed", seed_flag, "random seed override");
  app.add_option("--out", out_flag, "output directory override");
  app.add_option("--threads", threads_flag, "worker thread override");

  auto* features = app.add_subcommand("features", "extract the building-month feature table");

  auto* regress = app.add_subcommand("regress", "fit the energy regressions");
  std::string features_flag;
  regress->add_option("--features", features_flag, "feature table CSV override");

  auto* cluster = app.add_subcommand("cluster", "cluster the contribution matrix into microclimates");
  std::string cluster_features_flag, regression_flag, covariance_flag;
  std::optional<int> k_flag;
  bool environment_only = false;
  cluster->add_option("--features", cluster_features_flag, "feature table CSV override");
  cluster->add_option("--regression", regression_flag, "regression JSON override");
  cluster->add_option("--k", k_flag, "component count override");
  cluster->add_option("--covariance", covariance_flag, "diagonal|full");
  cluster->add_flag("--environment-only", environment_only,
                    "exclude avg_rad/assesstot/yearbuilt from clustering");

  auto* map_cmd = app.add_subcommand("map", "join assignments or deviations onto footprints");
  MapOptions map_opts;
  std::string footprints_flag, map_input, map_output;
  map_cmd->add_option("--input", map_input, "assignments or deviations CSV")->required();
  map_cmd->add_option("--footprints", footprints_flag, "footprints GeoJSON override");
  map_cmd->add_option("--month", map_opts.month, "YYYY-MM filter or 'all'");
  map_cmd->add_option("--output", map_output, "output GeoJSON path");

  auto* report_cmd = app.add_subcommand("report", "verify a run report's output digests");
  std::string report_path;
  report_cmd->add_option("--run", report_path, "run report JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    emit_error(err, "config", e.what());
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (out_flag) cfg.out_dir = *out_flag;
    if (threads_flag) cfg.threads = *threads_flag;

    if (features->parsed()) {
      if (config_path.empty()) throw ConfigError("features requires --config");
      cmd_features(cfg);
      out << "features written to " << (cfg.out_dir / "features.csv").string() << "\n";
      return 0;
    }
    if (regress->parsed()) {
      if (config_path.empty()) throw ConfigError("regress requires --config");
      if (!features_flag.empty()) cfg.feature_table = features_flag;
      cmd_regress(cfg);
      out << "regression results written to " << cfg.out_dir.string() << "\n";
      return 0;
    }
    if (cluster->parsed()) {
      if (config_path.empty()) throw ConfigError("cluster requires --config");
      if (!cluster_features_flag.empty()) cfg.feature_table = cluster_features_flag;
      if (!regression_flag.empty()) cfg.regression_file = regression_flag;
      if (k_flag) cfg.emc_k = *k_flag;
      if (!covariance_flag.empty())
        cfg.emc_covariance = emc::covariance_from_string(covariance_flag);
      if (environment_only) cfg.emc_exclude = {"avg_rad", "assesstot", "yearbuilt"};
      cmd_cluster(cfg);
      out << "cluster artifacts written to " << cfg.out_dir.string() << "\n";
      return 0;
    }
    if (map_cmd->parsed()) {
      if (!footprints_flag.empty()) cfg.footprints = footprints_flag;
      map_opts.input = map_input;
      if (!map_output.empty()) map_opts.output = map_output;
      cmd_map(cfg, map_opts);
      out << "map written\n";
      return 0;
    }
    if (report_cmd->parsed()) {
      cmd_report(report_path, out);
      out << "all digests verified\n";
      return 0;
    }
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    emit_error(err, "config", e.what());
    return e.exit_code();
  } catch (const DataError& e) {
    emit_error(err, "data", e.what());
    return e.exit_code();
  } catch (const NumericError& e) {
    emit_error(err, "numeric", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    emit_error(err, "internal", e.what());
    return 1;
  }
}

inline int run_argv(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace emclim::cli
