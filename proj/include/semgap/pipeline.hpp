#pragma once

// Pipeline stages over an output directory:
//
//   prep/<domain>.R.txt, prep/<domain>.D.txt, prep/ratings.csv  (prep, synth)
//   truth.json                                                  (synth)
//   gap_measurements.csv, fig2.csv                              (gap)
//   drift_<domain>.csv, avgj.csv, drift_report.json             (drift)
//   stats_report.json                                           (stats)
//   manifest.json                                               (every stage)
//
// Domains run in parallel on `jobs` workers; everything that crosses domains
// happens after all workers finish, so outputs do not depend on `jobs`.

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "semgap/compressgap.hpp"
#include "semgap/config.hpp"
#include "semgap/drift.hpp"
#include "semgap/embed.hpp"
#include "semgap/error.hpp"
#include "semgap/ingest.hpp"
#include "semgap/io.hpp"
#include "semgap/mixer.hpp"
#include "semgap/stats.hpp"
#include "semgap/synth.hpp"
#include "semgap/textprep.hpp"

namespace semgap::pipeline {

using nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "semgap 0.1.0";

struct Options {
  bool force = false;     // prep: rebuild even when up to date
  bool no_trend = false;  // gap: emit rel_delta only
  bool quiet = false;
  fs::path gap_csv;      // stats inputs; defaults under the output directory
  fs::path ratings_csv;
  fs::path avgj_csv;
};

struct Layout {
  fs::path out;

  fs::path prep_dir() const { return out / "prep"; }
  fs::path reviews(const std::string& d) const { return prep_dir() / (io::slug(d) + ".R.txt"); }
  fs::path descriptions(const std::string& d) const { return prep_dir() / (io::slug(d) + ".D.txt"); }
  fs::path ratings() const { return prep_dir() / "ratings.csv"; }
  fs::path stamp() const { return prep_dir() / ".stamp"; }
  fs::path truth() const { return out / "truth.json"; }
  fs::path gap() const { return out / "gap_measurements.csv"; }
  fs::path fig2() const { return out / "fig2.csv"; }
  fs::path drift(const std::string& d) const { return out / ("drift_" + io::slug(d) + ".csv"); }
  fs::path avgj() const { return out / "avgj.csv"; }
  fs::path drift_report() const { return out / "drift_report.json"; }
  fs::path stats() const { return out / "stats_report.json"; }
  fs::path manifest() const { return out / "manifest.json"; }
  fs::path corpora_dir() const { return out / "corpora"; }
  fs::path embed_dir() const { return out / "embed"; }
};

class Log {
 public:
  explicit Log(bool quiet) : quiet_(quiet) {}
  void operator()(const std::string& stage, const std::string& msg) const {
    if (quiet_) return;
    std::lock_guard lock(mutex());
    std::cerr << "[" << stage << "] " << msg << '\n';
  }

 private:
  static std::mutex& mutex() {
    static std::mutex m;
    return m;
  }
  bool quiet_;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads and rethrows the first
/// failure by index.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Merges one stage's record into manifest.json and refreshes the artifact
/// checksums. Only `stages.*.seconds` varies between identical runs.
inline void record_stage(const RunConfig& cfg, const std::string& stage, double seconds,
                         ordered_json details) {
  const Layout lay{cfg.out};
  ordered_json m;
  if (fs::exists(lay.manifest())) {
    try {
      m = ordered_json::parse(io::read_file(lay.manifest()));
    } catch (const ordered_json::parse_error&) {
      m = ordered_json::object();
    }
  }
  m["tool"] = kToolVersion;
  m["seed"] = cfg.seed;
  m["compressor"] = cfg.compressor.identity();
  m["config"] = cfg.snapshot();
  details["seconds"] = seconds;
  m["stages"][stage] = std::move(details);
  ordered_json arts = ordered_json::object();
  for (const auto& [path, sum] : io::checksum_tree(cfg.out, {"manifest.json"})) arts[path] = sum;
  m["artifacts"] = std::move(arts);
  io::write_file(lay.manifest(), m.dump(2) + "\n");
}

/// Artifact checksums recorded in a manifest.
inline std::map<std::string, std::string> manifest_artifacts(const fs::path& out) {
  const auto m = ordered_json::parse(io::read_file(Layout{out}.manifest()));
  std::map<std::string, std::string> arts;
  for (const auto& [k, v] : m.at("artifacts").items()) arts.emplace(k, v.get<std::string>());
  return arts;
}

// ---------------------------------------------------------------- prep

struct RatingRow {
  std::string domain;
  ingest::RatingSummary summary;
};

inline std::string ratings_csv(const std::vector<RatingRow>& rows) {
  io::CsvWriter w({"domain", "n_verified", "mean_rating", "std_rating"});
  for (const auto& r : rows) {
    w.row({r.domain, io::fmt(r.summary.n_verified), r.summary.defined() ? io::fmt(r.summary.mean) : "",
           r.summary.defined() ? io::fmt(r.summary.std) : ""});
  }
  return w.str();
}

inline std::string prep_fingerprint(const RunConfig& cfg) {
  std::ostringstream s;
  s << kToolVersion << '\n';
  if (cfg.synth) {
    s << cfg.snapshot()["synth"].dump() << '\n';
  }
  for (const auto& d : cfg.domains) {
    s << d.name << '\n';
    for (const auto& p : {d.reviews, d.meta}) {
      s << p.generic_string() << '\t';
      std::error_code ec;
      const auto size = fs::file_size(p, ec);
      const auto mtime = fs::last_write_time(p, ec);
      s << (ec ? 0 : size) << '\t' << mtime.time_since_epoch().count() << '\n';
    }
  }
  return io::sha256_hex(s.str());
}

inline std::vector<std::string> prep_domain_names(const RunConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.synth) {
    for (std::size_t i = 0; i < cfg.synth->n_domains; ++i) out.push_back(synth::suite_domain_name(i));
  } else {
    for (const auto& d : cfg.domains) out.push_back(d.name);
  }
  return out;
}

inline bool prep_up_to_date(const RunConfig& cfg) {
  const Layout lay{cfg.out};
  if (!fs::exists(lay.stamp()) || !fs::exists(lay.ratings())) return false;
  if (io::read_file(lay.stamp()) != prep_fingerprint(cfg) + "\n") return false;
  for (const auto& d : prep_domain_names(cfg)) {
    if (!fs::exists(lay.reviews(d)) || !fs::exists(lay.descriptions(d))) return false;
  }
  if (cfg.synth && !fs::exists(lay.truth())) return false;
  return true;
}

inline std::string render_corpus(const Corpus& c) {
  std::ostringstream os;
  for (std::size_t i = 0; i < c.size(); ++i) write_sentence_line(os, c.sources[i], c.words_of(i));
  return os.str();
}

/// Generates the synthetic suite described by [synth] into the prep layout.
inline ordered_json cmd_synth(const RunConfig& cfg, const Options& opt = {}) {
  const Log log(opt.quiet);
  const Layout lay{cfg.out};
  Stopwatch clock;
  ordered_json details;
  RunConfig eff = cfg;
  eff.synth = cfg.synth.value_or(SynthConfig{});
  if (!opt.force && prep_up_to_date(eff)) {
    log("synth", "outputs up to date, nothing to do");
    return {{"up_to_date", true}};
  }
  const auto levels = eff.synth_levels();
  const auto base = eff.synth_spec();
  const auto names = prep_domain_names(eff);

  std::vector<synth::SynthTruth> truths(names.size());
  std::vector<RatingRow> ratings(names.size());
  parallel_for(names.size(), cfg.jobs, [&](std::size_t i) {
    const auto spec = synth::suite_domain_spec(base, levels, i);
    auto dom = synth::generate_domain(spec, names[i]);
    io::write_file(lay.reviews(names[i]), render_corpus(dom.reviews));
    io::write_file(lay.descriptions(names[i]), render_corpus(dom.descriptions));
    ingest::RatingAccumulator acc;
    for (int r : dom.ratings) acc.add(r);
    ratings[i] = {names[i], acc.summary()};
    truths[i] = dom.truth;
    log("synth", names[i] + ": drift " + io::fmt(spec.drift_strength) + ", mean rating " +
                     io::fmt(ratings[i].summary.mean));
  });

  ordered_json truth;
  truth["generator"] = "topic-mixture";
  truth["spec"] = eff.snapshot()["synth"];
  truth["domains"] = ordered_json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& t = truths[i];
    truth["domains"].push_back({{"name", names[i]},
                                {"seed", t.seed},
                                {"drift_level", t.drift_level},
                                {"topic_purity", t.topic_purity},
                                {"configured_mean_rating", t.configured_mean_rating},
                                {"mean_rating", t.mean_rating},
                                {"planted", t.planted}});
  }
  io::write_file(lay.truth(), truth.dump(2) + "\n");
  io::write_file(lay.ratings(), ratings_csv(ratings));
  io::write_file(lay.stamp(), prep_fingerprint(eff) + "\n");
  details["domains"] = names;
  record_stage(cfg, "synth", clock.seconds(), details);
  return details;
}

struct PrepDomainResult {
  ingest::IngestCounts reviews, meta;
  std::uint64_t review_sentences = 0, description_sentences = 0;
  std::uint64_t review_tokens = 0, description_tokens = 0;
  ingest::RatingSummary rating;
};

inline PrepDomainResult prep_domain(const DomainInput& d, const Layout& lay) {
  for (auto [what, p] : {std::pair{"reviews", d.reviews}, std::pair{"metadata", d.meta}}) {
    if (!fs::is_regular_file(p)) {
      throw DataError("domain '" + d.name + "': " + what + " file not found: " + p.string());
    }
  }
  PrepDomainResult res;
  ingest::RatingAccumulator ratings;
  std::ostringstream rev;
  ingest::for_each_line(d.reviews, [&](std::string_view line, std::size_t no) {
    ++res.reviews.lines;
    auto r = ingest::parse_review_line(line, no, d.name);
    if (auto* e = std::get_if<ingest::ParseError>(&r)) return res.reviews.note_error(*e);
    if (std::holds_alternative<ingest::Skip>(r)) return void(++res.reviews.skipped);
    const auto& rec = std::get<ingest::ReviewRecord>(r);
    ++res.reviews.emitted;
    if (rec.verified) ratings.add(rec.rating);
    for (const auto& s : prepare_text(rec.text, false)) {
      write_sentence_line(rev, Source::kReview, s);
      ++res.review_sentences;
      res.review_tokens += s.size();
    }
  });
  std::ostringstream desc;
  ingest::for_each_line(d.meta, [&](std::string_view line, std::size_t no) {
    ++res.meta.lines;
    auto r = ingest::parse_meta_line(line, no, d.name);
    if (auto* e = std::get_if<ingest::ParseError>(&r)) return res.meta.note_error(*e);
    if (std::holds_alternative<ingest::Skip>(r)) return void(++res.meta.skipped);
    ++res.meta.emitted;
    for (const auto& s : prepare_text(std::get<ingest::DescriptionRecord>(r).text, true)) {
      write_sentence_line(desc, Source::kDescription, s);
      ++res.description_sentences;
      res.description_tokens += s.size();
    }
  });
  if (res.review_sentences == 0) throw DataError("domain '" + d.name + "': no usable review text");
  if (res.description_sentences == 0) throw DataError("domain '" + d.name + "': no usable description text");
  io::write_file(lay.reviews(d.name), rev.str());
  io::write_file(lay.descriptions(d.name), desc.str());
  res.rating = ratings.summary();
  return res;
}

inline ordered_json counts_json(const ingest::IngestCounts& c) {
  return {{"lines", c.lines}, {"emitted", c.emitted}, {"skipped", c.skipped},
          {"parse_errors", c.parse_errors}, {"first_errors", c.first_errors}};
}

/// Builds the intermediate corpora and ratings table; a [synth] config
/// generates them instead.
inline ordered_json cmd_prep(const RunConfig& cfg, const Options& opt = {}) {
  if (cfg.synth) return cmd_synth(cfg, opt);
  const Log log(opt.quiet);
  if (cfg.domains.empty()) throw UsageError("prep: the config defines no [domain.*] sections");
  const Layout lay{cfg.out};
  if (!opt.force && prep_up_to_date(cfg)) {
    log("prep", "outputs up to date, nothing to do");
    return {{"up_to_date", true}};
  }
  Stopwatch clock;
  std::vector<PrepDomainResult> results(cfg.domains.size());
  parallel_for(cfg.domains.size(), cfg.jobs, [&](std::size_t i) {
    results[i] = prep_domain(cfg.domains[i], lay);
    log("prep", cfg.domains[i].name + ": " + std::to_string(results[i].review_sentences) +
                    " review sentences, " + std::to_string(results[i].description_sentences) +
                    " description sentences");
  });
  std::vector<RatingRow> rows;
  ordered_json doms = ordered_json::object();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    rows.push_back({cfg.domains[i].name, r.rating});
    doms[cfg.domains[i].name] = {{"reviews", counts_json(r.reviews)},
                                 {"meta", counts_json(r.meta)},
                                 {"review_sentences", r.review_sentences},
                                 {"description_sentences", r.description_sentences},
                                 {"review_tokens", r.review_tokens},
                                 {"description_tokens", r.description_tokens},
                                 {"verified_ratings", r.rating.n_verified},
                                 {"mean_rating", r.rating.mean},
                                 {"std_rating", r.rating.std}};
  }
  io::write_file(lay.ratings(), ratings_csv(rows));
  io::write_file(lay.stamp(), prep_fingerprint(cfg) + "\n");
  ordered_json details{{"domains", doms}};
  record_stage(cfg, "prep", clock.seconds(), details);
  return details;
}

// ---------------------------------------------------------------- loading

/// Domains to process: the config's, or those listed in prep/ratings.csv.
inline std::vector<std::string> run_domains(const RunConfig& cfg) {
  if (!cfg.domains.empty() || cfg.synth) return prep_domain_names(cfg);
  const Layout lay{cfg.out};
  if (!fs::exists(lay.ratings())) {
    throw DataError("no prepared domains under " + lay.prep_dir().string() + "; run prep or synth first");
  }
  const auto t = io::read_csv(lay.ratings());
  const auto col = t.require("domain");
  std::vector<std::string> out;
  for (const auto& r : t.rows) out.push_back(r[col]);
  std::sort(out.begin(), out.end());
  return out;
}

struct DomainCorpora {
  Corpus reviews;
  Corpus descriptions;
};

inline void read_corpus(const fs::path& path, Source expect, Corpus& out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prepared corpus " + path.string() + "; run prep first");
  read_sentence_lines(in, [&](Source src, std::vector<std::string>&& toks) {
    if (src != expect) throw DataError(path.string() + ": unexpected source label");
    out.add(src, toks);
  });
}

inline DomainCorpora load_domain(const Layout& lay, const std::string& domain) {
  DomainCorpora c;
  c.descriptions.lexicon = c.reviews.lexicon;
  read_corpus(lay.reviews(domain), Source::kReview, c.reviews);
  read_corpus(lay.descriptions(domain), Source::kDescription, c.descriptions);
  if (c.reviews.empty() || c.descriptions.empty()) {
    throw DataError("domain '" + domain + "': empty prepared corpus");
  }
  return c;
}

// ---------------------------------------------------------------- gap

struct GapResult {
  std::vector<compress::GapMeasurement> measurements;  // domain order
  std::optional<compress::GapScoreTable> scores;
};

inline ordered_json cmd_gap(const RunConfig& cfg, const Options& opt = {}, GapResult* result = nullptr) {
  const Log log(opt.quiet);
  const Layout lay{cfg.out};
  Stopwatch clock;
  const auto domains = run_domains(cfg);
  if (domains.size() < 3 && !opt.no_trend) {
    throw UsageError("gap scores need at least 3 domains (have " + std::to_string(domains.size()) +
                     "); use --no-trend to emit rel_delta only");
  }
  const auto rand = cfg.effective_random();
  std::vector<compress::GapMeasurement> ms(domains.size());
  std::vector<ordered_json> info(domains.size());
  parallel_for(domains.size(), cfg.jobs, [&](std::size_t i) {
    const auto& name = domains[i];
    auto corpora = load_domain(lay, name);
    auto mixed = std::make_shared<const mixer::MixedCorpus>(
        mixer::build_mixed(corpora.reviews, corpora.descriptions));
    const auto targets = mixer::select_targets(count_vocab(*mixed), cfg.targets);
    compress::CorpusTap tap;
    std::vector<std::shared_ptr<std::ofstream>> files;
    if (cfg.keep_corpora) {
      fs::create_directories(lay.corpora_dir());
      tap = [&](const std::string& tag) -> std::function<void(std::string_view)> {
        auto f = std::make_shared<std::ofstream>(lay.corpora_dir() / (io::slug(name) + "." + tag + ".txt"),
                                                 std::ios::binary);
        files.push_back(f);
        return [f](std::string_view chunk) { f->write(chunk.data(), static_cast<std::streamsize>(chunk.size())); };
      };
    }
    ms[i] = compress::measure_gap(name, mixed, targets, rand, cfg.compressor, tap);
    info[i] = {{"common_vocabulary", targets.common_vocabulary},
               {"target_words", targets.size()},
               {"target_occurrences", ms[i].target_occurrences}};
    if (!targets.warning.empty()) info[i]["warning"] = targets.warning;
    log("gap", name + ": rel_delta " + io::fmt(ms[i].rel_delta) + ", ratio " + io::fmt(ms[i].compression_ratio));
  });

  std::optional<compress::GapScoreTable> table;
  if (!opt.no_trend) table = compress::fit_gap_scores(ms);

  io::CsvWriter gap({"domain", "raw_size", "c_true", "c_rand_mean", "c_rand_std", "delta", "rel_delta",
                     "compression_ratio", "gap_score", "gap_rank", "target_words", "target_occurrences"});
  io::CsvWriter fig({"domain", "compression_ratio", "rel_delta", "trend", "gap_score"});
  std::vector<std::size_t> order(ms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (table) {
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return table->rows[a].rank < table->rows[b].rank; });
  }
  for (auto i : order) {
    const auto& m = ms[i];
    const std::string score = table ? io::fmt(table->rows[i].gap_score) : "";
    const std::string rank = table ? io::fmt(static_cast<std::uint64_t>(table->rows[i].rank)) : "";
    gap.row({m.domain, io::fmt(m.raw_size), io::fmt(m.c_true), io::fmt(m.c_rand_mean), io::fmt(m.c_rand_std),
             io::fmt(m.delta), io::fmt(m.rel_delta), io::fmt(m.compression_ratio), score, rank,
             io::fmt(static_cast<std::uint64_t>(m.target_words)), io::fmt(m.target_occurrences)});
    const std::string trend = table ? io::fmt(table->intercept + table->slope * m.compression_ratio) : "";
    fig.row({m.domain, io::fmt(m.compression_ratio), io::fmt(m.rel_delta), trend, score});
  }
  io::write_file(lay.gap(), gap.str());
  io::write_file(lay.fig2(), fig.str());

  ordered_json details;
  details["domains"] = ordered_json::object();
  for (std::size_t i = 0; i < domains.size(); ++i) details["domains"][domains[i]] = info[i];
  if (table) {
    details["trend"] = {{"intercept", table->intercept}, {"slope", table->slope},
                        {"r_squared", table->r_squared}, {"degenerate", table->degenerate}};
    if (!table->warning.empty()) details["trend"]["warning"] = table->warning;
  } else {
    details["trend"] = nullptr;
  }
  record_stage(cfg, "gap", clock.seconds(), details);
  if (result) *result = {std::move(ms), std::move(table)};
  return details;
}

// ---------------------------------------------------------------- drift

inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(sep);
    out += v[i];
  }
  return out;
}

inline std::map<std::string, std::vector<std::string>> load_planted(const fs::path& truth) {
  std::map<std::string, std::vector<std::string>> out;
  if (!fs::exists(truth)) return out;
  const auto j = ordered_json::parse(io::read_file(truth));
  for (const auto& d : j.at("domains")) {
    out[d.at("name").get<std::string>()] = d.at("planted").get<std::vector<std::string>>();
  }
  return out;
}

struct DriftDomainResult {
  drift::Ranking ranking;
  ordered_json report;
  std::optional<drift::AvgAtGt> avg;
};

inline ordered_json cmd_drift(const RunConfig& cfg, const Options& opt = {}) {
  const Log log(opt.quiet);
  const Layout lay{cfg.out};
  Stopwatch clock;
  const auto domains = run_domains(cfg);
  std::optional<drift::GroundTruth> gt;
  if (!cfg.ground_truth.empty()) gt = drift::load_ground_truth(cfg.ground_truth);
  const auto planted = load_planted(lay.truth());

  std::vector<DriftDomainResult> res(domains.size());
  parallel_for(domains.size(), cfg.jobs, [&](std::size_t i) {
    const auto& name = domains[i];
    auto corpora = load_domain(lay, name);
    const auto balanced = count_vocab(mixer::build_mixed(corpora.reviews, corpora.descriptions));
    std::string warn_r, warn_d;
    const auto space_r = embed::train_cbow(corpora.reviews, cfg.effective_embed(true), &warn_r);
    const auto space_d = embed::train_cbow(corpora.descriptions, cfg.effective_embed(false), &warn_d);
    if (cfg.save_vectors) {
      fs::create_directories(lay.embed_dir());
      space_r.save_binary(lay.embed_dir() / (io::slug(name) + ".R.bin"));
      space_d.save_binary(lay.embed_dir() / (io::slug(name) + ".D.bin"));
    }
    auto& r = res[i];
    r.ranking = drift::rank_words(space_r, space_d, balanced, cfg.drift);

    io::CsvWriter w({"rank", "word", "f_r", "f_d", "jaccard", "S", "neighbors_r", "neighbors_d"});
    for (const auto& rec : r.ranking.records) {
      w.row({io::fmt(static_cast<std::uint64_t>(rec.rank)), rec.word, io::fmt(rec.f_r), io::fmt(rec.f_d),
             io::fmt(rec.jaccard), io::fmt(rec.score), join(rec.nbrs_r, '|'), join(rec.nbrs_d, '|')});
    }
    io::write_file(lay.drift(name), w.str());

    auto& rep = r.report;
    rep["vocab_reviews"] = space_r.size();
    rep["vocab_descriptions"] = space_d.size();
    rep["shared_vocabulary"] = r.ranking.shared_vocabulary;
    rep["ranked"] = r.ranking.records.size();
    rep["skipped_unbalanced"] = r.ranking.skipped_unbalanced;
    rep["epoch_loss_reviews"] = space_r.epoch_loss();
    rep["epoch_loss_descriptions"] = space_d.epoch_loss();
    std::vector<std::string> top;
    for (std::size_t k = 0; k < std::min<std::size_t>(10, r.ranking.records.size()); ++k) {
      top.push_back(r.ranking.records[k].word);
    }
    rep["top10"] = top;
    ordered_json warnings = ordered_json::array();
    if (!warn_r.empty()) warnings.push_back("reviews: " + warn_r);
    if (!warn_d.empty()) warnings.push_back("descriptions: " + warn_d);
    if (!warnings.empty()) rep["warnings"] = warnings;

    if (gt) {
      const auto words = gt->words(name);
      if (!words.empty()) {
        std::string absent;
        for (const auto& w : words) {
          if (!space_r.contains(w) || !space_d.contains(w)) absent += (absent.empty() ? "" : ", ") + w;
        }
        if (!absent.empty()) {
          throw DataError("domain '" + name + "': ground-truth words missing from the embedding vocabularies: " + absent);
        }
        r.avg = drift::avg_score_at_gt(r.ranking.records, words, std::min(cfg.gt_m, words.size()));
        rep["avg_at_gt"] = {{"m", r.avg->m}, {"prefix", r.avg->prefix},
                            {"avg_score", r.avg->mean_score}, {"avg_jaccard", r.avg->mean_jaccard}};
      }
    }
    if (auto it = planted.find(name); it != planted.end() && !it->second.empty()) {
      const auto ev = drift::evaluate_planted(r.ranking.records, it->second);
      rep["planted"] = {{"auc", ev.auc},
                        {"planted_ranked", ev.planted_ranked},
                        {"planted_missing", ev.planted_missing},
                        {"top_n", ev.top_n},
                        {"top_n_in_top_decile", ev.top_n_in_top_decile}};
    }
    log("drift", name + ": ranked " + std::to_string(r.ranking.records.size()) + " words");
  });

  ordered_json report;
  report["k"] = cfg.drift.k;
  report["p"] = cfg.drift.p;
  report["domains"] = ordered_json::object();
  for (std::size_t i = 0; i < domains.size(); ++i) report["domains"][domains[i]] = res[i].report;

  if (gt) {
    io::CsvWriter w({"domain", "m", "prefix", "avg_score", "avg_jaccard"});
    for (std::size_t i = 0; i < domains.size(); ++i) {
      if (!res[i].avg) continue;
      const auto& a = *res[i].avg;
      w.row({domains[i], io::fmt(static_cast<std::uint64_t>(a.m)), io::fmt(static_cast<std::uint64_t>(a.prefix)),
             io::fmt(a.mean_score), io::fmt(a.mean_jaccard)});
    }
    io::write_file(lay.avgj(), w.str());
    std::vector<std::string> unused;
    for (const auto& [d, _] : gt->domains) {
      if (std::find(domains.begin(), domains.end(), d) == domains.end()) unused.push_back(d);
    }
    report["ground_truth"] = {{"file", cfg.ground_truth.generic_string()}, {"domains_not_in_run", unused}};
  } else {
    fs::remove(lay.avgj());
  }
  io::write_file(lay.drift_report(), report.dump(2) + "\n");
  ordered_json details{{"domains", domains}, {"ground_truth", gt.has_value()}};
  record_stage(cfg, "drift", clock.seconds(), details);
  return report;
}

// ---------------------------------------------------------------- stats

/// Domain -> value for one numeric column; empty and n.a. cells are skipped.
inline std::map<std::string, double> column_values(const io::CsvTable& t, const std::string& col) {
  const auto d = t.require("domain");
  const auto c = t.require(col);
  std::map<std::string, double> out;
  for (const auto& r : t.rows) {
    if (auto v = io::parse_number(r[c], t.origin)) out[r[d]] = *v;
  }
  return out;
}

inline std::set<std::string> domain_keys(const io::CsvTable& t) {
  const auto d = t.require("domain");
  std::set<std::string> out;
  for (const auto& r : t.rows) {
    if (!out.insert(r[d]).second) throw DataError(t.origin + ": duplicate domain '" + r[d] + "'");
  }
  return out;
}

inline ordered_json stat_json(const stats::StatResult& r) {
  ordered_json j{{"test", r.test}, {"statistic", r.statistic}, {"n", r.n}, {"p_value", r.p_value}};
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j;
}

inline ordered_json correlate(const std::map<std::string, double>& x, const std::map<std::string, double>& y) {
  std::vector<double> xs, ys;
  std::vector<std::string> used;
  for (const auto& [d, v] : x) {
    if (auto it = y.find(d); it != y.end()) {
      xs.push_back(v);
      ys.push_back(it->second);
      used.push_back(d);
    }
  }
  if (xs.size() < 3) {
    throw DataError("stats: fewer than 3 aligned domains (" + std::to_string(xs.size()) + ")");
  }
  return {{"n", xs.size()}, {"domains", used},
          {"pearson", stat_json(stats::pearson(xs, ys))}, {"spearman", stat_json(stats::spearman(xs, ys))}};
}

inline ordered_json normality(const std::map<std::string, double>& col) {
  std::vector<double> v;
  for (const auto& [_, x] : col) v.push_back(x);
  try {
    return stat_json(stats::dagostino_k2(v));
  } catch (const Error& e) {
    return {{"test", "dagostino_k2"}, {"n", v.size()}, {"error", e.what()}};
  }
}

inline std::string describe_difference(const std::set<std::string>& a, const std::set<std::string>& b,
                                       const std::string& a_name, const std::string& b_name) {
  std::string only_a, only_b;
  for (const auto& d : a) {
    if (!b.count(d)) only_a += (only_a.empty() ? "" : ", ") + d;
  }
  for (const auto& d : b) {
    if (!a.count(d)) only_b += (only_b.empty() ? "" : ", ") + d;
  }
  std::string msg;
  if (!only_a.empty()) msg += "only in " + a_name + ": " + only_a;
  if (!only_b.empty()) msg += std::string(msg.empty() ? "" : "; ") + "only in " + b_name + ": " + only_b;
  return msg;
}

inline ordered_json cmd_stats(const RunConfig& cfg, const Options& opt = {}) {
  const Log log(opt.quiet);
  const Layout lay{cfg.out};
  Stopwatch clock;
  const fs::path gap_path = opt.gap_csv.empty() ? lay.gap() : opt.gap_csv;
  const fs::path rating_path = opt.ratings_csv.empty() ? lay.ratings() : opt.ratings_csv;
  const fs::path avgj_path = opt.avgj_csv.empty() ? lay.avgj() : opt.avgj_csv;

  const auto gap = io::read_csv(gap_path);
  const auto rat = io::read_csv(rating_path);
  const auto gap_keys = domain_keys(gap);
  const auto rat_keys = domain_keys(rat);
  if (gap_keys != rat_keys) {
    throw DataError("stats: gap and rating tables cover different domains (" +
                    describe_difference(gap_keys, rat_keys, "gap table", "rating table") + ")");
  }
  const auto score = column_values(gap, "gap_score");
  if (score.size() < 3) throw DataError("stats: fewer than 3 domains with a gap score; was gap run with --no-trend?");
  const auto rating = column_values(rat, "mean_rating");

  std::map<std::string, double> rank;
  if (gap.column("gap_rank")) {
    rank = column_values(gap, "gap_rank");
  } else {
    std::vector<std::pair<std::string, double>> v(score.begin(), score.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < v.size(); ++i) rank[v[i].first] = static_cast<double>(i + 1);
  }

  ordered_json rep;
  // Default inputs are named relative to the output directory so that the
  // report does not depend on where the run was written.
  auto shown = [&](const fs::path& given, const fs::path& dflt) {
    return (given.empty() ? dflt.lexically_relative(cfg.out) : given).generic_string();
  };
  rep["inputs"] = {{"gap", shown(opt.gap_csv, lay.gap())}, {"ratings", shown(opt.ratings_csv, lay.ratings())}};
  rep["gap_vs_rating"] = correlate(score, rating);
  rep["gap_rank_vs_rating"] = correlate(rank, rating);
  ordered_json norm;
  norm["gap_score"] = normality(score);
  norm["mean_rating"] = normality(rating);

  if (fs::exists(avgj_path)) {
    const auto avg = io::read_csv(avgj_path);
    const auto avg_keys = domain_keys(avg);
    std::string extra;
    for (const auto& d : avg_keys) {
      if (!gap_keys.count(d)) extra += (extra.empty() ? "" : ", ") + d;
    }
    if (!extra.empty()) throw DataError("stats: Avg.J domains missing from the gap table: " + extra);
    rep["inputs"]["avgj"] = shown(opt.avgj_csv, lay.avgj());
    const auto avg_score = column_values(avg, "avg_score");
    rep["gap_vs_avgj"] = correlate(score, avg_score);
    norm["avg_score"] = normality(avg_score);
    if (avg.column("avg_jaccard")) {
      const auto avg_jac = column_values(avg, "avg_jaccard");
      if (avg_jac.size() >= 3) {
        rep["gap_vs_avgj_jaccard"] = correlate(score, avg_jac);
        norm["avg_jaccard"] = normality(avg_jac);
      }
    }
  } else {
    log("stats", "no Avg.J table; gap-vs-Avg.J tests skipped");
  }
  rep["normality"] = norm;
  io::write_file(lay.stats(), rep.dump(2) + "\n");
  record_stage(cfg, "stats", clock.seconds(), {{"domains", score.size()}});
  return rep;
}

// ---------------------------------------------------------------- run-all

inline ordered_json run_all(const RunConfig& cfg, const Options& opt = {}) {
  ordered_json out;
  out["prep"] = cmd_prep(cfg, opt);
  out["gap"] = cmd_gap(cfg, opt);
  out["drift"] = cmd_drift(cfg, opt);
  if (opt.no_trend) {
    Log(opt.quiet)("stats", "skipped: gap scores were not fitted (--no-trend)");
  } else {
    out["stats"] = cmd_stats(cfg, opt);
  }
  return out;
}

}  // namespace semgap::pipeline
