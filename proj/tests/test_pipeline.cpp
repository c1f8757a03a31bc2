#include <catch_amalgamated.hpp>

#include "semgap/config.hpp"
#include "semgap/pipeline.hpp"
#include "support.hpp"

using namespace semgap;
using namespace semgap::pipeline;
using testsupport::TempDir;

namespace {

Options quiet() {
  Options o;
  o.quiet = true;
  return o;
}

RunConfig fixture_config(const TempDir& dir) {
  auto cfg = load_config(testsupport::data_dir() / "fixture.ini");
  cfg.out = dir.path();
  return cfg;
}

RunConfig synth_config(const TempDir& dir, std::vector<double> levels) {
  RunConfig cfg;
  cfg.out = dir.path();
  cfg.seed = 3;
  SynthConfig s;
  s.n_domains = levels.size();
  s.levels = std::move(levels);
  cfg.synth = s;
  cfg.random.trials = 3;
  return cfg;
}

std::map<std::string, std::string> column(const fs::path& csv, const std::string& col) {
  const auto t = io::read_csv(csv);
  const auto d = t.require("domain"), c = t.require(col);
  std::map<std::string, std::string> out;
  for (const auto& r : t.rows) out[r[d]] = r[c];
  return out;
}

}  // namespace

TEST_CASE("prep on the fixture is deterministic") {
  TempDir a("prep_a"), b("prep_b");
  const auto details = cmd_prep(fixture_config(a), quiet());
  cmd_prep(fixture_config(b), quiet());
  const auto sums_a = io::checksum_tree(a.path(), {"manifest.json"});
  const auto sums_b = io::checksum_tree(b.path(), {"manifest.json"});
  CHECK(sums_a == sums_b);
  CHECK(sums_a.count("prep/Kitchen.R.txt") == 1);
  CHECK(sums_a.count("prep/Garden.D.txt") == 1);
  CHECK(sums_a.count("prep/ratings.csv") == 1);
  CHECK(manifest_artifacts(a.path()) == manifest_artifacts(b.path()));

  const auto& k = details.at("domains").at("Kitchen");
  CHECK(k.at("reviews").at("lines") == 201);
  CHECK(k.at("reviews").at("parse_errors") == 1);
  CHECK(k.at("meta").at("lines") == 40);
  CHECK(k.at("meta").at("skipped") == 1);
  CHECK(k.at("verified_ratings").get<std::uint64_t>() > 0);
  const auto ratings = column(a / "prep/ratings.csv", "mean_rating");
  CHECK(ratings.size() == 3);
  CHECK(std::stod(ratings.at("Kitchen")) == k.at("mean_rating").get<double>());
}

TEST_CASE("prep rerun is a no-op unless forced") {
  TempDir dir("prep_rerun");
  const auto cfg = fixture_config(dir);
  cmd_prep(cfg, quiet());
  const auto before = fs::last_write_time(dir / "prep/Kitchen.R.txt");
  const auto again = cmd_prep(cfg, quiet());
  CHECK(again.value("up_to_date", false));
  CHECK(fs::last_write_time(dir / "prep/Kitchen.R.txt") == before);

  auto changed = cfg;
  changed.domains.pop_back();
  CHECK_FALSE(cmd_prep(changed, quiet()).value("up_to_date", false));
  auto forced = quiet();
  forced.force = true;
  CHECK_FALSE(cmd_prep(cfg, forced).value("up_to_date", false));
}

TEST_CASE("missing metadata names the domain") {
  TempDir dir("prep_missing");
  auto cfg = fixture_config(dir);
  cfg.domains[1].meta = dir / "absent.meta.json";
  try {
    cmd_prep(cfg, quiet());
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(cfg.domains[1].name) != std::string::npos);
    CHECK(msg.find("absent.meta.json") != std::string::npos);
  }
}

TEST_CASE("gap needs three domains unless the trend is skipped") {
  TempDir dir("gap_one");
  auto cfg = fixture_config(dir);
  cfg.domains.resize(1);
  cmd_prep(cfg, quiet());
  try {
    cmd_gap(cfg, quiet());
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("--no-trend") != std::string::npos);
  }
  auto opt = quiet();
  opt.no_trend = true;
  cmd_gap(cfg, opt);
  const auto rel = column(dir / "gap_measurements.csv", "rel_delta");
  const auto score = column(dir / "gap_measurements.csv", "gap_score");
  REQUIRE(rel.size() == 1);
  CHECK_FALSE(rel.begin()->second.empty());
  CHECK(score.begin()->second.empty());
}

TEST_CASE("gap with swap probability zero gives zero deltas") {
  TempDir dir("gap_p0");
  auto cfg = fixture_config(dir);
  cfg.random.swap_probability = 0.0;
  cmd_prep(cfg, quiet());
  GapResult res;
  cmd_gap(cfg, quiet(), &res);
  REQUIRE(res.measurements.size() == 3);
  for (const auto& m : res.measurements) CHECK(m.delta == 0.0);
  for (const auto& [_, v] : column(dir / "gap_measurements.csv", "delta")) CHECK(std::stod(v) == 0.0);
}

TEST_CASE("synth suite gap ranking follows drift levels") {
  TempDir dir("gap_levels");
  const auto cfg = synth_config(dir, {0.0, 0.5, 1.0});
  cmd_prep(cfg, quiet());
  GapResult res;
  cmd_gap(cfg, quiet(), &res);
  REQUIRE(res.scores);
  // Three points leave one residual pattern, which mostly reflects the
  // curvature of rel_delta in the level; only the top rank is stable.
  CHECK(res.scores->ranked().front().domain == "synth_02");
  CHECK(res.measurements[0].rel_delta < res.measurements[1].rel_delta);
  CHECK(res.measurements[1].rel_delta < res.measurements[2].rel_delta);
  CHECK(res.measurements[0].delta <= res.measurements[1].delta);
  CHECK(res.measurements[1].delta <= res.measurements[2].delta);
  CHECK(fs::exists(dir / "fig2.csv"));
  CHECK(fs::exists(dir / "truth.json"));
}

TEST_CASE("drift without ground truth omits avgj.csv") {
  TempDir dir("drift_nogt");
  auto cfg = fixture_config(dir);
  cfg.ground_truth.clear();
  cmd_prep(cfg, quiet());
  const auto rep = cmd_drift(cfg, quiet());
  CHECK_FALSE(fs::exists(dir / "avgj.csv"));
  for (const auto& d : cfg.domains) {
    CHECK(fs::exists(dir / ("drift_" + io::slug(d.name) + ".csv")));
    CHECK(rep.at("domains").at(d.name).at("ranked").get<std::size_t>() > 0);
  }
}

TEST_CASE("drift with ground truth writes Avg.J") {
  TempDir dir("drift_gt");
  const auto cfg = fixture_config(dir);
  cmd_prep(cfg, quiet());
  cmd_drift(cfg, quiet());
  const auto avg = column(dir / "avgj.csv", "avg_score");
  CHECK(avg.size() == 3);
  const auto prefix = column(dir / "avgj.csv", "prefix");
  for (const auto& [_, p] : prefix) CHECK(std::stoul(p) >= 3);
}

TEST_CASE("drift rejects k beyond the shared vocabulary") {
  TempDir dir("drift_k");
  auto cfg = fixture_config(dir);
  cfg.drift.k = 100000;
  cmd_prep(cfg, quiet());
  CHECK_THROWS_AS(cmd_drift(cfg, quiet()), UsageError);
}

TEST_CASE("stats reports mismatched domains") {
  TempDir dir("stats_mismatch");
  RunConfig cfg;
  cfg.out = dir.path();
  io::write_file(dir / "gap.csv", "domain,gap_score\nA,1\nB,2\nC,3\nD,4\n");
  io::write_file(dir / "rat.csv", "domain,mean_rating\nA,1\nB,2\nC,3\nE,4\n");
  auto opt = quiet();
  opt.gap_csv = dir / "gap.csv";
  opt.ratings_csv = dir / "rat.csv";
  try {
    cmd_stats(cfg, opt);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("only in gap table: D") != std::string::npos);
    CHECK(msg.find("only in rating table: E") != std::string::npos);
  }
  io::write_file(dir / "gap.csv", "domain,gap_score\nA,1\nB,2\n");
  io::write_file(dir / "rat.csv", "domain,mean_rating\nA,1\nB,2\n");
  CHECK_THROWS_AS(cmd_stats(cfg, opt), DataError);
}

TEST_CASE("stats on a perfectly linear fixture") {
  TempDir dir("stats_linear");
  RunConfig cfg;
  cfg.out = dir.path();
  io::write_file(dir / "gap.csv", "domain,gap_score\nA,1\nB,2\nC,3\nD,4\nE,5\nF,6\nG,7\nH,8\n");
  io::write_file(dir / "rat.csv", "domain,mean_rating\nA,3\nB,5\nC,7\nD,9\nE,11\nF,13\nG,15\nH,17\n");
  auto opt = quiet();
  opt.gap_csv = dir / "gap.csv";
  opt.ratings_csv = dir / "rat.csv";
  const auto rep = cmd_stats(cfg, opt);
  const auto& p = rep.at("gap_vs_rating").at("pearson");
  CHECK_THAT(p.at("statistic").get<double>(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(p.at("p_value").get<double>() < 1e-10);
  CHECK(rep.at("gap_vs_rating").at("spearman").at("statistic").get<double>() == 1.0);
  // ranks derived from scores run opposite to the scores
  CHECK(rep.at("gap_rank_vs_rating").at("spearman").at("statistic").get<double>() == -1.0);
  CHECK_FALSE(rep.contains("gap_vs_avgj"));
  CHECK(fs::exists(dir / "stats_report.json"));
}

TEST_CASE("run-all equals the composed stages and lists every output") {
  TempDir all("runall"), staged("staged");
  const auto cfg_all = fixture_config(all);
  const auto cfg_staged = fixture_config(staged);
  run_all(cfg_all, quiet());
  cmd_prep(cfg_staged, quiet());
  cmd_gap(cfg_staged, quiet());
  cmd_drift(cfg_staged, quiet());
  cmd_stats(cfg_staged, quiet());
  const auto arts = manifest_artifacts(all.path());
  CHECK(arts == manifest_artifacts(staged.path()));
  for (const auto* f : {"gap_measurements.csv", "fig2.csv", "avgj.csv", "drift_report.json", "stats_report.json",
                        "drift_Kitchen.csv", "prep/ratings.csv"}) {
    CHECK(arts.count(f) == 1);
  }
  CHECK(arts == io::checksum_tree(all.path(), {"manifest.json"}));

  const auto m = nlohmann::json::parse(io::read_file(all / "manifest.json"));
  CHECK(m.at("seed") == 11);
  CHECK(m.at("compressor").get<std::string>().starts_with("bzip2"));
  for (const auto* s : {"prep", "gap", "drift", "stats"}) CHECK(m.at("stages").contains(s));
}
