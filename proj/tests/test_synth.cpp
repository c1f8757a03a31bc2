#include <catch_amalgamated.hpp>

#include "semgap/compressgap.hpp"
#include "semgap/stats.hpp"
#include "semgap/synth.hpp"

using namespace semgap;
using namespace semgap::synth;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.vocab_size = 400;
  s.n_topics = 20;
  s.n_review_sentences = 20000;
  s.n_description_sentences = 4000;
  s.planted_words = 40;
  s.top_exclude = 150;
  return s;
}

// Home topic of the token next to each planted occurrence, relative to the
// planted word's own home topic, per source.
std::vector<std::vector<double>> context_topics(const SynthDomain& d, const SynthSpec& s) {
  std::vector<bool> planted(s.vocab_size, false);
  for (auto r : planted_ranks(s)) planted[r] = true;
  std::vector<std::vector<double>> table(2, std::vector<double>(s.n_topics, 0.0));
  int src = 0;
  for (const Corpus* c : {&d.reviews, &d.descriptions}) {
    for (std::size_t i = 0; i < c->size(); ++i) {
      const auto sent = c->sentence(i);
      for (std::size_t a = 0; a < sent.size(); ++a) {
        if (!planted[sent[a]]) continue;
        // one context token per occurrence keeps the counts independent
        const std::size_t b = a + 1 < sent.size() ? a + 1 : a - 1;
        if (a + 1 < sent.size() || a > 0) {
          if (!planted[sent[b]]) {
            const auto rel = (home_topic(sent[b], s.n_topics) + s.n_topics - home_topic(sent[a], s.n_topics)) % s.n_topics;
            table[src][rel] += 1;
          }
        }
      }
    }
    ++src;
  }
  return table;
}

// Chi-square test of homogeneity on a 2 x k table.
double homogeneity_p(const std::vector<std::vector<double>>& t) {
  const std::size_t k = t[0].size();
  double total = 0, rows[2] = {0, 0};
  std::vector<double> cols(k, 0.0);
  for (int r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      rows[r] += t[r][c];
      cols[c] += t[r][c];
      total += t[r][c];
    }
  }
  double chi2 = 0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (cols[c] == 0) continue;
    ++used;
    for (int r = 0; r < 2; ++r) {
      const double e = rows[r] * cols[c] / total;
      chi2 += (t[r][c] - e) * (t[r][c] - e) / e;
    }
  }
  return stats::chi2_sf(chi2, static_cast<double>(used - 1));
}

}  // namespace

TEST_CASE("word names are distinct and pronounceable") {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < 20000; ++i) {
    const auto w = word_for_rank(i);
    CHECK(seen.insert(w).second);
    for (char c : w) REQUIRE((c >= 'a' && c <= 'z'));
  }
}

TEST_CASE("identical spec and seed give identical corpora") {
  const auto a = generate_domain(small_spec());
  const auto b = generate_domain(small_spec());
  CHECK(a.reviews.tokens == b.reviews.tokens);
  CHECK(a.descriptions.tokens == b.descriptions.tokens);
  CHECK(a.ratings == b.ratings);
  CHECK(a.truth.planted == b.truth.planted);
  auto s = small_spec();
  s.seed = 2;
  CHECK(generate_domain(s).reviews.tokens != a.reviews.tokens);
}

TEST_CASE("planted words clear both vocabulary thresholds") {
  const auto s = small_spec();
  const auto d = generate_domain(s);
  REQUIRE(d.truth.planted.size() == s.planted_words);
  const auto r = count_vocab(d.reviews), ds = count_vocab(d.descriptions);
  for (const auto& w : d.truth.planted) {
    CHECK(r.get(w).reviews >= s.min_count_reviews);
    CHECK(ds.get(w).descriptions >= s.min_count_descriptions);
  }
}

TEST_CASE("drift planting keeps sentence lengths and word counts") {
  auto s = small_spec();
  s.drift_strength = 0.0;
  const auto base = generate_domain(s);
  s.drift_strength = 1.0;
  const auto drifted = generate_domain(s);
  CHECK(base.reviews.tokens == drifted.reviews.tokens);
  CHECK(base.descriptions.offsets == drifted.descriptions.offsets);
  CHECK(count_vocab(base.descriptions) == count_vocab(drifted.descriptions));
  CHECK(base.descriptions.tokens != drifted.descriptions.tokens);
}

TEST_CASE("without drift planted contexts match across sources") {
  auto s = small_spec();
  s.drift_strength = 0.0;
  CHECK(homogeneity_p(context_topics(generate_domain(s), s)) > 0.01);
  s.drift_strength = 1.0;
  CHECK(homogeneity_p(context_topics(generate_domain(s), s)) < 1e-6);
}

TEST_CASE("token frequencies follow the Zipf profile") {
  const auto s = small_spec();
  const auto d = generate_domain(s);
  for (const Corpus* c : {&d.reviews, &d.descriptions}) {
    std::vector<double> counts(s.vocab_size, 0.0);
    for (auto id : c->tokens) counts[id] += 1;  // id == rank
    const double n = static_cast<double>(c->tokens.size());
    const double h = harmonic(s.vocab_size);
    double emp = 0, model = 0, ks = 0;
    for (std::size_t r = 0; r < s.vocab_size; ++r) {
      emp += counts[r] / n;
      model += zipf_weight(r + 1) / h;
      ks = std::max(ks, std::abs(emp - model));
    }
    CHECK(ks < 0.1);
  }
}

TEST_CASE("planted drift raises the compression gap") {
  // Full default size: smaller corpora bury the drift under trial noise.
  SynthSpec s;
  std::vector<double> deltas;
  for (double level : {0.0, 0.5, 1.0}) {
    s.drift_strength = level;
    const auto d = generate_domain(s);
    auto mixed = std::make_shared<const mixer::MixedCorpus>(mixer::build_mixed(d.reviews, d.descriptions));
    const auto targets = mixer::select_targets(count_vocab(*mixed), {});
    deltas.push_back(compress::measure_gap("d", mixed, targets, {0.5, 1, 3}, {}).delta);
  }
  CHECK(deltas[0] <= deltas[1]);
  CHECK(deltas[1] <= deltas[2]);
  CHECK(deltas[2] > 0.0);
}

TEST_CASE("ratings follow the configured coupling") {
  auto s = small_spec();
  s.n_review_sentences = 3000;
  s.n_description_sentences = 600;
  s.planted_words = 0;
  std::vector<double> level, rating;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto d = generate_domain(suite_domain_spec(s, {static_cast<double>(i) / 19.0}, i));
    level.push_back(static_cast<double>(i) / 19.0);
    rating.push_back(d.truth.mean_rating);
    CHECK(d.ratings.size() == s.n_ratings);
    for (int r : d.ratings) REQUIRE((r >= 1 && r <= 5));
  }
  CHECK(std::abs(stats::pearson(level, rating).statistic) < 0.15);

  s.rating_coupling = 0.45;
  std::vector<double> coupled;
  for (std::size_t i = 0; i < 20; ++i) {
    coupled.push_back(generate_domain(suite_domain_spec(s, {level[i]}, i)).truth.mean_rating);
  }
  CHECK(stats::pearson(level, coupled).statistic < -0.7);
}

TEST_CASE("suite construction") {
  auto s = small_spec();
  s.n_review_sentences = 2000;
  s.n_description_sentences = 400;
  s.planted_words = 0;
  const auto suite = generate_suite(3, {0.0, 0.5, 1.0}, s);
  REQUIRE(suite.size() == 3);
  CHECK(suite[0].name == "synth_00");
  CHECK(suite[2].truth.drift_level == 1.0);
  CHECK(suite[0].truth.seed != suite[1].truth.seed);
  for (const auto& d : suite) {
    CHECK(d.truth.topic_purity >= s.topic_purity - s.purity_jitter);
    CHECK(d.truth.topic_purity <= s.topic_purity + s.purity_jitter);
  }
  const auto repeated = generate_suite(5, {0.5}, s);
  CHECK(repeated.size() == 5);
  CHECK(repeated[4].truth.drift_level == 0.5);
  CHECK_THROWS_AS(generate_suite(3, {}, s), UsageError);
  CHECK_THROWS_AS(generate_suite(2, {0.0, 1.0}, s), UsageError);
  CHECK_THROWS_AS(generate_suite(4, {0.0, 1.0}, s), UsageError);
}

TEST_CASE("spec validation") {
  auto s = small_spec();
  s.planted_words = 41;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = small_spec();
  s.drift_strength = 1.5;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = small_spec();
  s.n_review_sentences = 500;
  CHECK_THROWS_AS(generate_domain(s), UsageError);
}
