// semgap command-line driver.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semgap/config.hpp"
#include "semgap/error.hpp"
#include "semgap/pipeline.hpp"

namespace {

using semgap::ExitCode;
namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> jobs;
  std::optional<double> swap_probability;
  std::string ground_truth;
  semgap::pipeline::Options opt;
};

semgap::RunConfig resolve(const Flags& f) {
  semgap::RunConfig cfg = f.config.empty() ? semgap::RunConfig{} : semgap::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out = f.out;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.swap_probability) cfg.random.swap_probability = *f.swap_probability;
  if (!f.ground_truth.empty()) cfg.ground_truth = f.ground_truth;
  cfg.validate();
  return cfg;
}

int fail(ExitCode code, const std::string& msg) {
  std::cerr << "semgap: error: " << msg << '\n';
  return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lexical-semantic gap between customer reviews and product descriptions"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "global seed (overrides [run] seed)");
  app.add_option("--out", f.out, "output directory (overrides [run] out)");
  app.add_option("--jobs", f.jobs, "domains processed in parallel")->check(CLI::PositiveNumber);
  app.add_flag("--force", f.opt.force, "rebuild prepared corpora even when up to date");
  app.add_flag("--quiet", f.opt.quiet, "no progress messages");

  auto* prep = app.add_subcommand("prep", "tokenize raw reviews and metadata into prepared corpora");
  auto* gap = app.add_subcommand("gap", "True/Rand compression gap and trend-residual gap scores");
  gap->add_flag("--no-trend", f.opt.no_trend, "skip the trend fit and emit rel_delta only");
  gap->add_option("--swap-probability", f.swap_probability, "label flip probability for Rand corpora")
      ->check(CLI::Range(0.0, 1.0));
  auto* drift = app.add_subcommand("drift", "train embeddings and rank words by neighbor drift");
  drift->add_option("--ground-truth", f.ground_truth, "TSV of annotated drift words")->check(CLI::ExistingFile);
  auto* stats = app.add_subcommand("stats", "correlation and normality tests across domains");
  stats->add_option("--gap", f.opt.gap_csv, "gap table (domain, gap_score[, gap_rank])")->check(CLI::ExistingFile);
  stats->add_option("--ratings", f.opt.ratings_csv, "rating table (domain, mean_rating)")->check(CLI::ExistingFile);
  stats->add_option("--avgj", f.opt.avgj_csv, "Avg.J table (domain, avg_score[, avg_jaccard])")->check(CLI::ExistingFile);
  auto* synth = app.add_subcommand("synth", "generate a synthetic suite with planted drift");
  auto* all = app.add_subcommand("run-all", "prep, gap, drift and stats in sequence");
  all->add_flag("--no-trend", f.opt.no_trend, "skip the trend fit and the stats stage");
  all->add_option("--ground-truth", f.ground_truth, "TSV of annotated drift words")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  namespace pl = semgap::pipeline;
  try {
    const auto cfg = resolve(f);
    if (prep->parsed()) pl::cmd_prep(cfg, f.opt);
    if (gap->parsed()) pl::cmd_gap(cfg, f.opt);
    if (drift->parsed()) pl::cmd_drift(cfg, f.opt);
    if (stats->parsed()) pl::cmd_stats(cfg, f.opt);
    if (synth->parsed()) pl::cmd_synth(cfg, f.opt);
    if (all->parsed()) pl::run_all(cfg, f.opt);
  } catch (const semgap::Error& e) {
    return fail(e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(ExitCode::kData, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ExitCode::kData, e.what());
  } catch (const std::exception& e) {
    return fail(ExitCode::kInvariant, std::string("internal error: ") + e.what());
  }
  return 0;
}
