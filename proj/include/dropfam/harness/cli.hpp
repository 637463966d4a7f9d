#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dropfam/bounds/bound_report.hpp"
#include "dropfam/family/buckets.hpp"
#include "dropfam/harness/selftest.hpp"
#include "dropfam/harness/sweep.hpp"
#include "dropfam/harness/temperature.hpp"
#include "dropfam/harness/train.hpp"

namespace dropfam::cli {

inline constexpr const char* kOutputDirEnv = "DROPFAM_OUTPUT_DIR";

// Relative output paths land under $DROPFAM_OUTPUT_DIR when it is set.
inline std::string output_path(const std::string& path) {
  if (path.empty() || path == "-") return path;
  std::filesystem::path p(path);
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir && p.is_relative())
    p = std::filesystem::path(dir) / p;
  return p.string();
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  const std::string resolved = output_path(path);
  std::ofstream f(resolved, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + resolved + "'");
  f << text;
}

inline FamilyParams family_from_flags(const std::string& alpha, double lambda, double temperature,
                                      std::size_t samples) {
  FamilyParams fp;
  if (alpha == "det") {
    fp = FamilyParams::det(temperature, lambda);
  } else {
    try {
      std::size_t used = 0;
      fp.alpha = std::stod(alpha, &used);
      if (used != alpha.size()) throw std::invalid_argument(alpha);
    } catch (const std::exception&) {
      throw DomainError("--alpha must be a number in [0,1] or 'det'");
    }
    fp.lambda = lambda;
    fp.temperature = temperature;
    fp.samples = samples;
  }
  fp.validate();
  return fp;
}

// Calls f(net, data_for_split) for the checkpoint's architecture.
template <class F>
void with_split(const Checkpoint& ck, const ExperimentData& data, const std::string& split,
                std::size_t max_targets, F&& f) {
  std::visit(
      [&](const auto& net) {
        using Net = std::decay_t<decltype(net)>;
        if constexpr (std::is_same_v<Net, LstmNet>) {
          f(net, language_split(ck.config, std::get<LanguageData>(data), split, max_targets));
        } else {
          f(net, classification_split(std::get<ClassificationData>(data), split, max_targets));
        }
      },
      ck.net);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"dropfam: dropout family model selection and lower-bound analysis"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, grid_path, out_path, alpha = "det", split = "valid",
              grid_spec = "0.5,3.0,51", thresholds;
  double lambda = 1.0, temperature = 1.0;
  std::size_t samples = 200, max_targets = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 0;

  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
  train_cmd->add_option("config", config_path, "experiment config (JSON)")->required();
  train_cmd->add_option("--out", out_path, "checkpoint path (default: <config>.ckpt.json)");
  train_cmd->add_option("--threads", threads, "worker threads");

  auto add_eval_flags = [&](CLI::App* cmd) {
    cmd->add_option("checkpoint", ckpt_path, "checkpoint (JSON)")->required();
    cmd->add_option("--lambda", lambda, "evaluation dropout-rate multiplier in [0,1]");
    cmd->add_option("--samples", samples, "MC samples");
    cmd->add_option("--split", split, "train, valid or test");
    cmd->add_option("--max-targets", max_targets, "evaluate on the first N targets only");
    cmd->add_option("--threads", threads, "worker threads");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; }, "evaluation seed");
  };

  auto* eval_cmd = app.add_subcommand("eval", "evaluate one family point");
  add_eval_flags(eval_cmd);
  eval_cmd->add_option("--alpha", alpha, "power in [0,1], or 'det'");
  eval_cmd->add_option("--temp", temperature, "softmax temperature");

  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a grid of family points to CSV");
  sweep_cmd->add_option("checkpoint", ckpt_path, "checkpoint (JSON)")->required();
  sweep_cmd->add_option("grid", grid_path, "grid (JSON)")->required();
  sweep_cmd->add_option("--out", out_path, "CSV path (default: stdout)");
  sweep_cmd->add_option("--threads", threads, "worker threads");
  sweep_cmd->add_option("--max-targets", max_targets, "evaluate on the first N targets only");

  auto* bounds_cmd = app.add_subcommand("bounds", "MAP lower-bound decomposition to JSON");
  add_eval_flags(bounds_cmd);
  bounds_cmd->add_option("--alpha", alpha, "power in [0,1]");
  bounds_cmd->add_option("--out", out_path, "JSON path (default: stdout)");

  auto* tune_cmd = app.add_subcommand("tune-temp", "linear search for the softmax temperature");
  add_eval_flags(tune_cmd);
  tune_cmd->add_option("--alpha", alpha, "power in [0,1], or 'det'");
  tune_cmd->add_option("--grid", grid_spec, "tmin,tmax,n");

  auto* buckets_cmd = app.add_subcommand("buckets", "XE per training-frequency bucket to CSV");
  buckets_cmd->add_option("checkpoint", ckpt_path, "checkpoint (JSON)")->required();
  buckets_cmd->add_option("--thresholds", thresholds, "comma separated, e.g. >25000,<500");
  buckets_cmd->add_option("--samples", samples, "MC samples");
  buckets_cmd->add_option("--max-targets", max_targets, "evaluate on the first N targets of each split");
  buckets_cmd->add_option("--out", out_path, "CSV path (default: stdout)");
  buckets_cmd->add_option("--threads", threads, "worker threads");

  auto* selftest_cmd = app.add_subcommand("selftest", "run the enumeration-oracle and gap-sandwich checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*selftest_cmd) return run_selftest(out) ? 0 : 2;

    if (*train_cmd) {
      ExperimentConfig cfg = load_config(config_path);
      if (threads) cfg.threads = threads;
      const auto data = load_data(cfg);
      auto result = train(cfg, data, &out);
      if (out_path.empty())
        out_path = std::filesystem::path(config_path).stem().string() + ".ckpt.json";
      const std::string resolved = output_path(out_path);
      save_checkpoint(result.checkpoint, resolved);
      out << "wrote " << resolved << "\n";
      return 0;
    }

    // Flag validation comes before any file is read.
    if (*bounds_cmd && alpha == "det") alpha = "1";
    if (*eval_cmd || *bounds_cmd || *tune_cmd)
      family_from_flags(alpha, lambda, *eval_cmd ? temperature : 1.0, samples);
    if (*tune_cmd) parse_temperature_grid(grid_spec);

    const Checkpoint ck = load_checkpoint(ckpt_path);
    const auto data = load_data(ck.config);
    const unsigned workers = threads ? threads : ck.config.threads;
    const SplitSeed eval_seed(seed_given ? seed : ck.config.seed);

    if (*eval_cmd) {
      const FamilyParams fp = family_from_flags(alpha, lambda, temperature, samples);
      with_split(ck, data, split, max_targets, [&](const auto& net, const auto& set) {
        const auto r = evaluate_dataset(net, set, fp, eval_seed, workers);
        out << "split=" << split << " targets=" << r.targets << " xe=" << format_real(r.xe)
            << " perplexity=" << format_real(r.perplexity) << "\n";
      });
      return 0;
    }

    if (*sweep_cmd) {
      const SweepGrid grid = parse_sweep_grid(json::parse(read_file(grid_path)));
      const SplitSeed s(grid.seed ? *grid.seed : ck.config.seed);
      std::vector<SweepRow> rows;
      for (const auto& sp : grid.splits) {
        with_split(ck, data, sp, max_targets ? max_targets : grid.max_targets,
                   [&](const auto& net, const auto& set) {
                     auto part = sweep_split(net, set, sp, grid.points, s, workers);
                     rows.insert(rows.end(), part.begin(), part.end());
                   });
      }
      write_output(out_path, sweep_csv(rows), out);
      return 0;
    }

    if (*bounds_cmd) {
      const FamilyParams fp = family_from_flags(alpha, lambda, 1.0, samples);
      with_split(ck, data, split, max_targets, [&](const auto& net, const auto& set) {
        const auto r = bound_report(net, set, fp.alpha, fp.lambda, fp.samples, eval_seed,
                                    ck.config.weight_decay, workers);
        json j = {{"split", split},
                  {"alpha", r.alpha},
                  {"lambda", r.lambda},
                  {"samples", r.samples},
                  {"targets", r.targets},
                  {"data_term", r.data_term},
                  {"data_term_se", r.data_term_se},
                  {"power_mean_term", r.power_mean_term},
                  {"power_mean_term_se", r.power_mean_term_se},
                  {"log_Z_term", r.log_Z_term},
                  {"log_Z_term_se", r.log_Z_term_se},
                  {"jensen_gap", r.jensen_gap},
                  {"prior_term", r.prior_term}};
        write_output(out_path, j.dump(2) + "\n", out);
      });
      return 0;
    }

    if (*tune_cmd) {
      const FamilyParams fp = family_from_flags(alpha, lambda, 1.0, samples);
      const TemperatureGrid grid = parse_temperature_grid(grid_spec);
      with_split(ck, data, split, max_targets, [&](const auto& net, const auto& set) {
        const auto r = temperature_linear_search(net, set, fp, grid, eval_seed, workers);
        out << "t_opt=" << format_real(r.t_opt) << " xe=" << format_real(r.xe_at_t_opt) << "\n";
      });
      return 0;
    }

    if (*buckets_cmd) {
      const auto* lm = std::get_if<LanguageData>(&data);
      const auto* net = std::get_if<LstmNet>(&ck.net);
      if (!lm || !net) throw ConfigError("buckets needs a language-model checkpoint");
      std::vector<FrequencyThreshold> ths;
      std::vector<std::string> specs = ck.config.buckets;
      if (!thresholds.empty()) {
        specs.clear();
        std::stringstream ss(thresholds);
        std::string item;
        while (std::getline(ss, item, ',')) specs.push_back(item);
      }
      for (const auto& s : specs) ths.push_back(parse_threshold(s));
      const std::vector<FamilyParams> methods{FamilyParams::det(), {1.0, 0.8, 1.0, samples, false},
                                              {1.0, 1.0, 1.0, samples, false}};
      const std::vector<std::string> names{"det", "amc_x0.8", "amc"};
      const auto rep = frequency_bucket_report(*net, language_split(ck.config, *lm, "train", max_targets),
                                               language_split(ck.config, *lm, "valid", max_targets),
                                               lm->corpus.train_frequency, methods, ths, eval_seed, workers);
      std::string csv = "bucket,split,method,alpha,lambda,temperature,samples,targets,xe\n";
      char buf[64];
      for (const auto& r : rep.rows) {
        const auto& m = rep.methods[r.method];
        csv += r.bucket + "," + r.split + "," + names[r.method] + "," +
               (m.deterministic ? std::string("det") : format_real(m.alpha)) + "," +
               format_real(m.lambda) + "," + format_real(m.temperature) + "," +
               std::to_string(m.deterministic ? 0 : m.samples) + "," + std::to_string(r.targets) + ",";
        std::snprintf(buf, sizeof buf, "%.10f\n", r.xe);
        csv += buf;
      }
      write_output(out_path, csv, out);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace dropfam::cli
