#pragma once

// Synthetic review/description corpora with planted drift.
//
// Every word has a Zipf(1) weight by rank and a home topic (round robin over
// ranks). A sentence picks one topic (proportional to topic mass), then draws
// each token from that topic's words with probability `topic_purity`,
// otherwise from the whole vocabulary, so marginal frequencies are Zipf.
// Planted words keep their home topic in reviews; in descriptions a fraction
// `drift_strength` of their occurrences is moved into sentences of a second
// topic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semgap/error.hpp"
#include "semgap/ingest.hpp"
#include "semgap/mixer.hpp"
#include "semgap/textprep.hpp"

namespace semgap::synth {

struct SynthSpec {
  std::size_t vocab_size = 1000;
  std::size_t n_topics = 50;
  std::size_t n_review_sentences = 100000;
  std::size_t n_description_sentences = 14000;
  double sentence_length = 10.0;  // mean tokens per sentence
  double topic_purity = 0.9;      // share of tokens drawn from the sentence topic
  // Suites draw each domain's purity uniformly within +-purity_jitter of
  // topic_purity, giving domains different baseline compressibility.
  double purity_jitter = 0.05;
  std::size_t planted_words = 100;
  double drift_strength = 1.0;
  double rating_coupling = 0.0;
  double base_rating = 4.3;
  double rating_sd = 1.2;        // spread of individual star ratings
  double rating_noise = 0.1;     // domain-level spread of the mean rating
  std::size_t n_ratings = 2000;
  std::uint64_t seed = 1;
  // Planted words are placed right after this many top-ranked words, with a
  // small margin, so that they fall inside the gap target vocabulary.
  std::size_t top_exclude = 500;
  std::uint64_t min_count_reviews = 50;
  std::uint64_t min_count_descriptions = 10;

  void validate() const {
    if (vocab_size < 10) throw UsageError("synth: vocab_size must be >= 10");
    if (n_topics < 2 || n_topics > vocab_size) throw UsageError("synth: need 2 <= n_topics <= vocab_size");
    if (planted_words * 10 > vocab_size) throw UsageError("synth: planted words must be <= vocab_size/10");
    if (!(drift_strength >= 0.0 && drift_strength <= 1.0)) {
      throw UsageError("synth: drift_strength must lie in [0, 1]");
    }
    if (!(sentence_length >= 1.0)) throw UsageError("synth: sentence_length must be >= 1");
    if (!(topic_purity > 0.0 && topic_purity <= 1.0)) {
      throw UsageError("synth: topic_purity must lie in (0, 1]");
    }
    if (!(purity_jitter >= 0.0 && purity_jitter < topic_purity)) {
      throw UsageError("synth: purity_jitter must lie in [0, topic_purity)");
    }
    if (n_review_sentences == 0 || n_description_sentences == 0) {
      throw UsageError("synth: both sources need at least one sentence");
    }
  }
};

struct SynthTruth {
  std::vector<std::string> planted;
  double drift_level = 0.0;
  double topic_purity = 0.0;
  double configured_mean_rating = 0.0;
  double mean_rating = 0.0;
  std::uint64_t seed = 0;
};

struct SynthDomain {
  std::string name;
  Corpus reviews;
  Corpus descriptions;
  std::vector<int> ratings;
  SynthTruth truth;
};

/// Pronounceable, distinct lowercase word for a 0-based rank.
inline std::string word_for_rank(std::size_t index) {
  static constexpr char kConsonants[] = "bdfghklmnprstvz";  // 15
  static constexpr char kVowels[] = "aeiou";                  // 5
  constexpr std::size_t kSyllables = 75;
  std::size_t digits = 2;
  std::size_t span = kSyllables * kSyllables;
  while (index >= span) {
    index -= span;
    ++digits;
    span *= kSyllables;
  }
  std::string w;
  for (std::size_t d = 0; d < digits; ++d) {
    const std::size_t s = index % kSyllables;
    index /= kSyllables;
    w.push_back(kConsonants[s / 5]);
    w.push_back(kVowels[s % 5]);
  }
  return w;
}

inline double zipf_weight(std::size_t rank1) { return 1.0 / static_cast<double>(rank1); }

inline double harmonic(std::size_t n) {
  double h = 0.0;
  for (std::size_t r = 1; r <= n; ++r) h += zipf_weight(r);
  return h;
}

/// 0-based ranks of the planted words: the first `planted_words` ranks after
/// the excluded head plus a 5% margin.
inline std::vector<std::size_t> planted_ranks(const SynthSpec& spec) {
  const std::size_t first = spec.top_exclude + spec.top_exclude / 20;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.planted_words; ++i) out.push_back(first + i);
  return out;
}

inline std::size_t home_topic(std::size_t rank0, std::size_t n_topics) { return rank0 % n_topics; }

inline std::size_t drift_topic(std::size_t rank0, std::size_t n_topics) {
  return (home_topic(rank0, n_topics) + n_topics / 2) % n_topics;
}

namespace detail {

// Expected occurrences of the word at 0-based `rank0` in a source of `tokens` tokens.
inline double expected_count(std::size_t rank0, double tokens, double h) {
  return tokens * zipf_weight(rank0 + 1) / h;
}

struct TopicTables {
  std::vector<std::vector<std::uint32_t>> words;  // lexicon ids per topic
  std::vector<std::discrete_distribution<std::size_t>> pick;
  std::discrete_distribution<std::size_t> topic;
  std::discrete_distribution<std::size_t> background;  // over ranks
  std::vector<std::uint32_t> ids;                      // by rank
  double purity = 1.0;
};

inline TopicTables build_tables(const SynthSpec& spec, const std::vector<std::uint32_t>& ids) {
  const std::size_t t_count = spec.n_topics;
  std::vector<std::vector<double>> weights(t_count);
  TopicTables tables;
  tables.words.resize(t_count);
  for (std::size_t r = 0; r < spec.vocab_size; ++r) {
    const std::size_t home = home_topic(r, t_count);
    tables.words[home].push_back(ids[r]);
    weights[home].push_back(zipf_weight(r + 1));
  }
  std::vector<double> mass(t_count, 0.0);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (double w : weights[t]) mass[t] += w;
    tables.pick.emplace_back(weights[t].begin(), weights[t].end());
  }
  tables.topic = std::discrete_distribution<std::size_t>(mass.begin(), mass.end());
  std::vector<double> all(spec.vocab_size);
  for (std::size_t r = 0; r < spec.vocab_size; ++r) all[r] = zipf_weight(r + 1);
  tables.background = std::discrete_distribution<std::size_t>(all.begin(), all.end());
  tables.ids = ids;
  tables.purity = spec.topic_purity;
  return tables;
}

inline std::vector<std::size_t> generate_sentences(const TopicTables& tables_in, Source source,
                                                   std::size_t n, double mean_length,
                                                   std::mt19937_64& rng, Corpus& out) {
  auto tables = tables_in;  // distributions carry sampling state
  std::poisson_distribution<std::size_t> extra(mean_length - 1.0);
  std::bernoulli_distribution topical(tables.purity);
  std::vector<std::uint32_t> sentence;
  std::vector<std::size_t> topics;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = tables.topic(rng);
    const std::size_t len = 1 + (mean_length > 1.0 ? extra(rng) : 0);
    sentence.clear();
    for (std::size_t i = 0; i < len; ++i) {
      if (topical(rng)) {
        sentence.push_back(tables.words[t][tables.pick[t](rng)]);
      } else {
        sentence.push_back(tables.ids[tables.background(rng)]);
      }
    }
    out.add_ids(source, sentence);
    topics.push_back(t);
  }
  return topics;
}

// Moves each description occurrence of a planted word, with probability
// `drift_strength`, into a random sentence of the word's drift topic by
// swapping it with a token there. Sentence lengths and word counts are
// unchanged, and so is every other token of the base corpus. Decisions are
// keyed by (word rank, occurrence), so smaller planted sets make a subset of
// the swaps made by larger ones.
inline void plant_drift(const SynthSpec& spec, const std::vector<std::size_t>& planted,
                        const std::vector<std::size_t>& topics, Corpus& desc) {
  if (spec.drift_strength <= 0.0 || planted.empty()) return;
  const std::size_t t_count = spec.n_topics;
  const std::size_t band_lo = planted_ranks(spec).front();
  const std::size_t band_hi = band_lo + spec.vocab_size / 10;  // widest possible planted band
  // Synthetic lexicons intern words in rank order, so id == rank.
  auto in_band = [&](std::uint32_t id) { return id >= band_lo && id < band_hi; };

  std::vector<std::vector<std::size_t>> by_topic(t_count);
  for (std::size_t s = 0; s < topics.size(); ++s) by_topic[topics[s]].push_back(s);

  std::vector<std::vector<std::size_t>> positions(spec.vocab_size);
  std::vector<bool> is_planted(spec.vocab_size, false);
  for (auto r : planted) is_planted[r] = true;
  for (std::size_t i = 0; i < desc.tokens.size(); ++i) {
    if (is_planted[desc.tokens[i]]) positions[desc.tokens[i]].push_back(i);
  }
  const std::uint64_t key = mixer::splitmix64(spec.seed ^ 0x04);
  for (auto r : planted) {
    const auto& targets = by_topic[drift_topic(r, t_count)];
    if (targets.empty()) continue;
    for (std::size_t k = 0; k < positions[r].size(); ++k) {
      if (mixer::keyed_uniform(key, r, 3 * k) >= spec.drift_strength) continue;
      const std::size_t pick = static_cast<std::size_t>(
          mixer::keyed_uniform(key, r, 3 * k + 1) * static_cast<double>(targets.size()));
      const std::size_t s = targets[pick];
      const std::size_t len = desc.offsets[s + 1] - desc.offsets[s];
      std::size_t j = static_cast<std::size_t>(mixer::keyed_uniform(key, r, 3 * k + 2) *
                                               static_cast<double>(len));
      for (std::size_t tries = 0; tries < len; ++tries, j = (j + 1) % len) {
        const std::size_t at = desc.offsets[s] + j;
        if (in_band(desc.tokens[at])) continue;
        std::swap(desc.tokens[at], desc.tokens[positions[r][k]]);
        break;
      }
    }
  }
}

}  // namespace detail

/// Checks that planted words can be expected to clear both vocabulary
/// thresholds by a margin of three Poisson standard deviations.
inline void check_feasible(const SynthSpec& spec) {
  const double h = harmonic(spec.vocab_size);
  const double rev_tokens = static_cast<double>(spec.n_review_sentences) * spec.sentence_length;
  const double desc_tokens = static_cast<double>(spec.n_description_sentences) * spec.sentence_length;
  for (auto r : planted_ranks(spec)) {
    if (r >= spec.vocab_size) throw UsageError("synth: planted words exceed the vocabulary");
    for (auto [tokens, floor] : {std::pair{rev_tokens, spec.min_count_reviews},
                                 std::pair{desc_tokens, spec.min_count_descriptions}}) {
      const double mu = detail::expected_count(r, tokens, h);
      if (mu - 3.0 * std::sqrt(mu) < static_cast<double>(floor)) {
        throw UsageError("synth: infeasible spec, planted word at rank " + std::to_string(r + 1) +
                         " expects " + std::to_string(mu) + " occurrences, below min_count " +
                         std::to_string(floor) + " with margin");
      }
    }
  }
}

inline SynthDomain generate_domain(const SynthSpec& spec, std::string name = "synth") {
  spec.validate();
  if (spec.planted_words > 0) check_feasible(spec);

  SynthDomain dom;
  dom.name = std::move(name);
  auto lexicon = std::make_shared<Lexicon>();
  std::vector<std::uint32_t> ids;
  for (std::size_t r = 0; r < spec.vocab_size; ++r) ids.push_back(lexicon->intern(word_for_rank(r)));
  dom.reviews.lexicon = lexicon;
  dom.descriptions.lexicon = lexicon;

  const auto planted = planted_ranks(spec);
  for (auto r : planted) dom.truth.planted.push_back(word_for_rank(r));
  dom.truth.drift_level = spec.drift_strength;
  dom.truth.topic_purity = spec.topic_purity;
  dom.truth.seed = spec.seed;

  // Independent streams per stage keep each source stable when another
  // stage's parameters change.
  std::mt19937_64 rev_rng(mixer::splitmix64(spec.seed ^ 0x01));
  std::mt19937_64 desc_rng(mixer::splitmix64(spec.seed ^ 0x02));
  std::mt19937_64 rating_rng(mixer::splitmix64(spec.seed ^ 0x03));

  const auto tables = detail::build_tables(spec, ids);
  detail::generate_sentences(tables, Source::kReview, spec.n_review_sentences,
                             spec.sentence_length, rev_rng, dom.reviews);
  const auto topics = detail::generate_sentences(tables, Source::kDescription,
                                                 spec.n_description_sentences,
                                                 spec.sentence_length, desc_rng, dom.descriptions);
  detail::plant_drift(spec, planted, topics, dom.descriptions);

  std::normal_distribution<double> unit(0.0, 1.0);
  const double mu = spec.base_rating - spec.rating_coupling * spec.drift_strength +
                    spec.rating_noise * unit(rating_rng);
  dom.truth.configured_mean_rating = mu;
  ingest::RatingAccumulator acc;
  for (std::size_t i = 0; i < spec.n_ratings; ++i) {
    const double v = std::round(mu + spec.rating_sd * unit(rating_rng));
    const int stars = static_cast<int>(std::clamp(v, 1.0, 5.0));
    dom.ratings.push_back(stars);
    acc.add(stars);
  }
  dom.truth.mean_rating = acc.summary().mean;
  return dom;
}

inline std::string suite_domain_name(std::size_t i) {
  char name[32];
  std::snprintf(name, sizeof name, "synth_%02zu", i);
  return name;
}

/// Spec of domain `i` in a suite: its drift level, a seed derived from the
/// base seed, and a jittered topic purity.
inline SynthSpec suite_domain_spec(const SynthSpec& base, const std::vector<double>& levels, std::size_t i) {
  SynthSpec spec = base;
  spec.drift_strength = levels.size() == 1 ? levels.front() : levels.at(i);
  spec.seed = mixer::splitmix64(base.seed + 0x1000 * (i + 1));
  const double u = mixer::keyed_uniform(base.seed, 0x9u, i);
  spec.topic_purity = std::min(1.0, base.topic_purity + base.purity_jitter * (2.0 * u - 1.0));
  return spec;
}

/// One domain per drift level. A single level with n_domains > 1 is repeated
/// with different seeds.
inline std::vector<SynthDomain> generate_suite(std::size_t n_domains, const std::vector<double>& levels,
                                               const SynthSpec& base) {
  if (levels.empty()) throw UsageError("synth suite: drift level list is empty");
  if (n_domains < 3) throw UsageError("synth suite: need at least 3 domains");
  if (levels.size() != 1 && levels.size() != n_domains) {
    throw UsageError("synth suite: give one drift level or exactly n_domains levels");
  }
  std::vector<SynthDomain> out;
  for (std::size_t i = 0; i < n_domains; ++i) {
    out.push_back(generate_domain(suite_domain_spec(base, levels, i), suite_domain_name(i)));
  }
  return out;
}

}  // namespace semgap::synth
