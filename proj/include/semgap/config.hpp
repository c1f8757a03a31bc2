#pragma once

// Run configuration: one INI file plus command-line overrides.
//
//   [run]            seed, out, jobs
//   [domain.<name>]  reviews, meta
//   [targets]        top_exclude, min_count
//   [random]         swap_probability, trials, seed
//   [compressor]     format, level, keep_corpora
//   [embed.reviews], [embed.descriptions]
//                    dim, window, epochs, min_count, negative, subsample,
//                    lr_start, lr_end, threads
//   [drift]          k, p, m, ground_truth, save_vectors
//   [synth]          n_domains, levels, and every SynthSpec field
//
// Relative paths are resolved against the directory of the config file.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "semgap/compressgap.hpp"
#include "semgap/drift.hpp"
#include "semgap/embed.hpp"
#include "semgap/error.hpp"
#include "semgap/io.hpp"
#include "semgap/mixer.hpp"
#include "semgap/synth.hpp"

namespace semgap {

namespace fs = std::filesystem;

struct DomainInput {
  std::string name;
  fs::path reviews;
  fs::path meta;
};

struct SynthConfig {
  std::size_t n_domains = 10;
  std::vector<double> levels;  // empty: evenly spaced over [0, 1]
  synth::SynthSpec spec;
};

struct RunConfig {
  std::uint64_t seed = 1;
  fs::path out = "semgap_out";
  std::size_t jobs = 1;
  std::vector<DomainInput> domains;  // sorted by name
  mixer::TargetSelectionParams targets;
  mixer::RandomizationParams random;
  std::optional<std::uint64_t> random_seed;  // defaults to `seed`
  compress::CompressorSpec compressor;
  bool keep_corpora = false;
  embed::TrainParams embed_reviews = embed::TrainParams::reviews_defaults();
  embed::TrainParams embed_descriptions = embed::TrainParams::descriptions_defaults();
  drift::DriftParams drift;
  std::size_t gt_m = 10;
  fs::path ground_truth;
  bool save_vectors = false;
  std::optional<SynthConfig> synth;
  fs::path source;  // config file, if any

  /// Parameters with the global seed folded in.
  mixer::RandomizationParams effective_random() const {
    auto r = random;
    r.seed = random_seed.value_or(seed);
    return r;
  }
  embed::TrainParams effective_embed(bool reviews) const {
    auto p = reviews ? embed_reviews : embed_descriptions;
    p.seed = mixer::splitmix64(seed ^ (reviews ? 0x52u : 0x44u));
    return p;
  }
  std::vector<double> synth_levels() const {
    if (!synth) return {};
    if (!synth->levels.empty()) return synth->levels;
    std::vector<double> out;
    const std::size_t n = synth->n_domains;
    for (std::size_t i = 0; i < n; ++i) out.push_back(n == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
  }
  synth::SynthSpec synth_spec() const {
    auto s = synth ? synth->spec : synth::SynthSpec{};
    s.seed = seed;
    return s;
  }

  void validate() const {
    if (jobs < 1) throw UsageError("jobs must be >= 1");
    targets.validate();
    random.validate();
    compressor.validate();
    embed_reviews.validate();
    embed_descriptions.validate();
    drift.validate();
    if (gt_m < 1) throw UsageError("drift.m must be >= 1");
    if (synth) {
      synth->spec.validate();
      if (!synth->levels.empty() && synth->levels.size() != 1 && synth->levels.size() != synth->n_domains) {
        throw UsageError("synth.levels needs one value or n_domains values");
      }
    }
    if (!domains.empty() && synth) {
      throw UsageError("a config may define [domain.*] sections or a [synth] section, not both");
    }
  }

  nlohmann::ordered_json snapshot() const;
};

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& raw) {
  const std::string s(semgap::detail::trim(raw));
  if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw UsageError("config key '" + key + "': expected a boolean, got '" + s + "'");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return s;
  } else {
    T v{};
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
      throw UsageError("config key '" + key + "': cannot parse '" + s + "'");
    }
    return v;
  }
}

inline std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::size_t b = 0;
  while (b <= raw.size()) {
    auto e = raw.find(',', b);
    if (e == std::string::npos) e = raw.size();
    const std::string cell(semgap::detail::trim(std::string_view(raw).substr(b, e - b)));
    if (!cell.empty()) out.push_back(parse_value<double>(key, cell));
    b = e + 1;
  }
  return out;
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;
using KeyTable = std::map<std::string, Setter>;

template <typename T>
Setter set(T& field) {
  return [&field](const std::string& k, const std::string& v) { field = parse_value<T>(k, v); };
}

inline KeyTable embed_keys(embed::TrainParams& p) {
  return {{"dim", set(p.dim)},
          {"window", set(p.window)},
          {"epochs", set(p.epochs)},
          {"min_count", set(p.min_count)},
          {"negative", set(p.negative)},
          {"subsample", set(p.subsample_threshold)},
          {"lr_start", set(p.lr_start)},
          {"lr_end", set(p.lr_end)},
          {"threads", set(p.threads)}};
}

inline void apply_section(const std::string& section, const KeyTable& keys,
                          const boost::property_tree::ptree& tree) {
  for (const auto& [key, node] : tree) {
    auto it = keys.find(key);
    if (it == keys.end()) throw UsageError("unknown config key [" + section + "] " + key);
    it->second(section + "." + key, node.get_value<std::string>());
  }
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const fs::path& base_dir = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  for (const auto& [section, node] : tree) {
    using detail::set;
    if (node.empty() && !node.data().empty()) {
      throw UsageError("config key '" + section + "' outside any section");
    }
    if (section == "run") {
      std::string out;
      detail::apply_section(section, {{"seed", set(cfg.seed)}, {"out", set(out)}, {"jobs", set(cfg.jobs)}}, node);
      if (!out.empty()) cfg.out = resolve(out);
    } else if (section.starts_with("domain.")) {
      DomainInput d;
      d.name = section.substr(7);
      std::string reviews, meta;
      detail::apply_section(section, {{"reviews", set(reviews)}, {"meta", set(meta)}}, node);
      if (d.name.empty() || reviews.empty() || meta.empty()) {
        throw UsageError("[" + section + "] needs a domain name and both 'reviews' and 'meta' paths");
      }
      d.reviews = resolve(reviews);
      d.meta = resolve(meta);
      cfg.domains.push_back(std::move(d));
    } else if (section == "targets") {
      detail::apply_section(section, {{"top_exclude", set(cfg.targets.top_exclude)},
                                      {"min_count", set(cfg.targets.min_count)}}, node);
    } else if (section == "random") {
      std::uint64_t seed = 0;
      bool has_seed = node.count("seed") != 0;
      detail::apply_section(section, {{"swap_probability", set(cfg.random.swap_probability)},
                                      {"trials", set(cfg.random.trials)},
                                      {"seed", set(seed)}}, node);
      if (has_seed) cfg.random_seed = seed;
    } else if (section == "compressor") {
      detail::apply_section(section, {{"format", set(cfg.compressor.format)},
                                      {"level", set(cfg.compressor.level)},
                                      {"keep_corpora", set(cfg.keep_corpora)}}, node);
    } else if (section == "embed.reviews") {
      detail::apply_section(section, detail::embed_keys(cfg.embed_reviews), node);
    } else if (section == "embed.descriptions") {
      detail::apply_section(section, detail::embed_keys(cfg.embed_descriptions), node);
    } else if (section == "drift") {
      std::string gt;
      detail::apply_section(section, {{"k", set(cfg.drift.k)},
                                      {"p", set(cfg.drift.p)},
                                      {"m", set(cfg.gt_m)},
                                      {"ground_truth", set(gt)},
                                      {"save_vectors", set(cfg.save_vectors)}}, node);
      if (!gt.empty()) cfg.ground_truth = resolve(gt);
    } else if (section == "synth") {
      SynthConfig sc;
      auto& s = sc.spec;
      detail::apply_section(
          section,
          {{"n_domains", set(sc.n_domains)},
           {"levels", [&](const std::string& k, const std::string& v) { sc.levels = detail::parse_list(k, v); }},
           {"vocab_size", set(s.vocab_size)},
           {"n_topics", set(s.n_topics)},
           {"n_review_sentences", set(s.n_review_sentences)},
           {"n_description_sentences", set(s.n_description_sentences)},
           {"sentence_length", set(s.sentence_length)},
           {"topic_purity", set(s.topic_purity)},
           {"purity_jitter", set(s.purity_jitter)},
           {"planted_words", set(s.planted_words)},
           {"rating_coupling", set(s.rating_coupling)},
           {"base_rating", set(s.base_rating)},
           {"rating_sd", set(s.rating_sd)},
           {"rating_noise", set(s.rating_noise)},
           {"n_ratings", set(s.n_ratings)},
           {"top_exclude", set(s.top_exclude)},
           {"min_count_reviews", set(s.min_count_reviews)},
           {"min_count_descriptions", set(s.min_count_descriptions)}},
          node);
      cfg.synth = std::move(sc);
    } else {
      throw UsageError("unknown config section [" + section + "]");
    }
  }
  std::sort(cfg.domains.begin(), cfg.domains.end(),
            [](const DomainInput& a, const DomainInput& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < cfg.domains.size(); ++i) {
    if (io::slug(cfg.domains[i].name) == io::slug(cfg.domains[i - 1].name)) {
      throw UsageError("domains '" + cfg.domains[i - 1].name + "' and '" + cfg.domains[i].name +
                       "' map to the same file name");
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  auto cfg = parse_config(in, path.parent_path());
  cfg.source = path;
  return cfg;
}

inline nlohmann::ordered_json RunConfig::snapshot() const {
  using nlohmann::ordered_json;
  auto embed_json = [](const embed::TrainParams& p) {
    return ordered_json{{"dim", p.dim},           {"window", p.window},
                        {"epochs", p.epochs},     {"min_count", p.min_count},
                        {"negative", p.negative}, {"subsample", p.subsample_threshold},
                        {"lr_start", p.lr_start}, {"lr_end", p.lr_end},
                        {"threads", p.threads},   {"seed", p.seed}};
  };
  ordered_json j;
  j["seed"] = seed;
  j["jobs"] = jobs;
  ordered_json doms = ordered_json::array();
  for (const auto& d : domains) {
    doms.push_back({{"name", d.name}, {"reviews", d.reviews.generic_string()}, {"meta", d.meta.generic_string()}});
  }
  j["domains"] = doms;
  j["targets"] = {{"top_exclude", targets.top_exclude}, {"min_count", targets.min_count}};
  const auto r = effective_random();
  j["random"] = {{"swap_probability", r.swap_probability}, {"trials", r.trials}, {"seed", r.seed}};
  j["compressor"] = {{"format", compressor.format}, {"level", compressor.level}, {"keep_corpora", keep_corpora}};
  j["embed_reviews"] = embed_json(effective_embed(true));
  j["embed_descriptions"] = embed_json(effective_embed(false));
  j["drift"] = {{"k", drift.k}, {"p", drift.p}, {"m", gt_m},
                {"ground_truth", ground_truth.generic_string()}, {"save_vectors", save_vectors}};
  if (synth) {
    const auto s = synth_spec();
    j["synth"] = {{"n_domains", synth->n_domains},
                  {"levels", synth_levels()},
                  {"vocab_size", s.vocab_size},
                  {"n_topics", s.n_topics},
                  {"n_review_sentences", s.n_review_sentences},
                  {"n_description_sentences", s.n_description_sentences},
                  {"sentence_length", s.sentence_length},
                  {"topic_purity", s.topic_purity},
                  {"purity_jitter", s.purity_jitter},
                  {"planted_words", s.planted_words},
                  {"rating_coupling", s.rating_coupling},
                  {"base_rating", s.base_rating},
                  {"rating_sd", s.rating_sd},
                  {"rating_noise", s.rating_noise},
                  {"n_ratings", s.n_ratings},
                  {"top_exclude", s.top_exclude},
                  {"min_count_reviews", s.min_count_reviews},
                  {"min_count_descriptions", s.min_count_descriptions},
                  {"seed", s.seed}};
  }
  return j;
}

}  // namespace semgap
