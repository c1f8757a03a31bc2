#pragma once

// Interleaved review/description corpus, target vocabulary selection and the
// True/Rand labeled corpora.
//
// A labeled corpus renders every occurrence of a target word as `word_R` or
// `word_D`. The True variant uses the source of the sentence; the Rand
// variant flips each True label independently with probability P. Flip
// decisions are a pure function of (seed, trial, occurrence index), so any
// block of sentences can be labeled independently and the output stays
// reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semgap/error.hpp"
#include "semgap/textprep.hpp"

namespace semgap::mixer {

using MixedCorpus = Corpus;

/// Appends review sentences as they arrive, each followed by the next
/// description; descriptions restart from the first one when exhausted.
class MixedCorpusBuilder {
 public:
  /// `descriptions` must use the same lexicon the builder will intern into.
  explicit MixedCorpusBuilder(const Corpus& descriptions) : desc_(descriptions) {
    if (descriptions.empty()) throw UsageError("build_mixed: description corpus is empty");
    out_.lexicon = descriptions.lexicon;
  }

  void add_review(std::span<const std::uint32_t> ids) {
    out_.add_ids(Source::kReview, ids);
    out_.add_ids(Source::kDescription, desc_.sentence(next_desc_));
    next_desc_ = (next_desc_ + 1) % desc_.size();
  }

  void add_review(const std::vector<std::string>& words) {
    scratch_.clear();
    for (const auto& w : words) scratch_.push_back(out_.lexicon->intern(w));
    add_review(scratch_);
  }

  MixedCorpus finish() && {
    if (out_.empty()) throw UsageError("build_mixed: review corpus is empty");
    return std::move(out_);
  }

 private:
  const Corpus& desc_;
  MixedCorpus out_;
  std::size_t next_desc_ = 0;
  std::vector<std::uint32_t> scratch_;
};

/// Interleaves r1, d1, r2, d2, ... until the reviews run out. Both corpora
/// must share one lexicon.
inline MixedCorpus build_mixed(const Corpus& reviews, const Corpus& descriptions) {
  if (reviews.lexicon != descriptions.lexicon) {
    throw UsageError("build_mixed: review and description corpora use different lexicons");
  }
  MixedCorpusBuilder builder(descriptions);
  for (std::size_t i = 0; i < reviews.size(); ++i) builder.add_review(reviews.sentence(i));
  return std::move(builder).finish();
}

/// Convenience overload over token lists.
inline MixedCorpus build_mixed(const std::vector<std::vector<std::string>>& reviews,
                               const std::vector<std::vector<std::string>>& descriptions) {
  Corpus desc;
  for (const auto& d : descriptions) desc.add(Source::kDescription, d);
  MixedCorpusBuilder builder(desc);
  for (const auto& r : reviews) builder.add_review(r);
  return std::move(builder).finish();
}

struct TargetSelectionParams {
  std::size_t top_exclude = 500;
  std::uint64_t min_count = 50;

  void validate() const {
    if (min_count < 1) throw UsageError("min_count must be >= 1");
  }
};

struct TargetVocabulary {
  std::set<std::string> words;
  TargetSelectionParams params;
  std::size_t common_vocabulary = 0;
  std::string warning;

  bool contains(const std::string& w) const { return words.count(w) != 0; }
  std::size_t size() const { return words.size(); }
};

/// Common vocabulary (seen in both sources) minus its `top_exclude` most
/// frequent words minus words below `min_count`, all by mixed-corpus
/// frequency. At equal frequency the lexicographically smaller word is
/// excluded first.
inline TargetVocabulary select_targets(const VocabStats& stats, const TargetSelectionParams& params) {
  params.validate();
  struct Entry {
    const std::string* word;
    std::uint64_t freq;
  };
  std::vector<Entry> common;
  for (const auto& [w, c] : stats.words) {
    if (c.reviews > 0 && c.descriptions > 0) common.push_back({&w, c.mixed});
  }
  std::sort(common.begin(), common.end(), [](const Entry& a, const Entry& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    return *a.word < *b.word;
  });
  TargetVocabulary out;
  out.params = params;
  out.common_vocabulary = common.size();
  for (std::size_t i = params.top_exclude; i < common.size(); ++i) {
    if (common[i].freq >= params.min_count) out.words.insert(*common[i].word);
  }
  if (out.words.empty()) {
    out.warning = "target vocabulary is empty; True and Rand corpora will be identical";
  }
  return out;
}

struct RandomizationParams {
  double swap_probability = 0.5;
  std::uint64_t seed = 0x5eed;
  std::size_t trials = 5;

  void validate() const {
    if (!(swap_probability >= 0.0 && swap_probability <= 1.0)) {
      throw UsageError("swap probability must lie in [0, 1]");
    }
    if (trials < 1) throw UsageError("at least one Rand trial is required");
  }
};

enum class Variant { kTrue, kRand };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform in [0, 1), keyed by (seed, trial, index).
inline double keyed_uniform(std::uint64_t seed, std::uint64_t trial, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (trial * 0xD1B54A32D192ED03ULL));
  h = splitmix64(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

struct LabeledCorpus {
  std::shared_ptr<const MixedCorpus> mixed;
  std::shared_ptr<const std::vector<bool>> is_target;  // by lexicon id
  Variant variant = Variant::kTrue;
  std::size_t trial = 0;
  std::vector<Source> labels;  // one per target occurrence, corpus order
  std::uint64_t n_r = 0;
  std::uint64_t n_d = 0;
  std::uint64_t flipped = 0;
  std::uint64_t serialized_bytes = 0;
};

inline std::shared_ptr<const std::vector<bool>> target_mask(const MixedCorpus& mixed,
                                                            const TargetVocabulary& targets) {
  auto mask = std::make_shared<std::vector<bool>>(mixed.lexicon->size(), false);
  for (const auto& w : targets.words) {
    if (auto id = mixed.lexicon->find(w)) (*mask)[*id] = true;
  }
  return mask;
}

/// Labels every target occurrence. `trial` selects the Rand draw; it is
/// ignored for the True variant.
inline LabeledCorpus label_corpus(std::shared_ptr<const MixedCorpus> mixed,
                                  std::shared_ptr<const std::vector<bool>> mask, Variant variant,
                                  const RandomizationParams& rand, std::size_t trial = 0) {
  rand.validate();
  LabeledCorpus out;
  out.variant = variant;
  out.trial = trial;
  const auto& lex = *mixed->lexicon;
  std::uint64_t bytes = 0;
  std::uint64_t occurrence = 0;
  for (std::size_t s = 0; s < mixed->size(); ++s) {
    const auto sentence = mixed->sentence(s);
    const Source truth = mixed->sources[s];
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const auto id = sentence[i];
      bytes += lex.word(id).size() + 1;  // word + separator or newline
      if (id >= mask->size() || !(*mask)[id]) continue;
      Source label = truth;
      if (variant == Variant::kRand &&
          keyed_uniform(rand.seed, trial, occurrence) < rand.swap_probability) {
        label = other(label);
        ++out.flipped;
      }
      (label == Source::kReview ? out.n_r : out.n_d) += 1;
      out.labels.push_back(label);
      bytes += 2;
      ++occurrence;
    }
  }
  out.serialized_bytes = bytes;
  out.mixed = std::move(mixed);
  out.is_target = std::move(mask);
  return out;
}

inline LabeledCorpus label_corpus(std::shared_ptr<const MixedCorpus> mixed,
                                  const TargetVocabulary& targets, Variant variant,
                                  const RandomizationParams& rand, std::size_t trial = 0) {
  auto mask = target_mask(*mixed, targets);
  return label_corpus(std::move(mixed), std::move(mask), variant, rand, trial);
}

/// Streams the UTF-8 rendering: tokens separated by one space, one sentence
/// per line ending in '\n', target words suffixed `_R`/`_D`. `write` receives
/// `std::string_view` chunks. Returns the number of bytes written.
template <typename Write>
std::uint64_t serialize_labeled(const LabeledCorpus& corpus, Write&& write,
                                std::size_t chunk_bytes = 1 << 16) {
  const auto& mixed = *corpus.mixed;
  const auto& mask = *corpus.is_target;
  const auto& lex = *mixed.lexicon;
  std::string buf;
  buf.reserve(chunk_bytes + 256);
  std::uint64_t total = 0;
  std::size_t occurrence = 0;
  for (std::size_t s = 0; s < mixed.size(); ++s) {
    const auto sentence = mixed.sentence(s);
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const auto id = sentence[i];
      if (i) buf.push_back(' ');
      buf += lex.word(id);
      if (id < mask.size() && mask[id]) {
        buf.push_back('_');
        buf.push_back(source_code(corpus.labels.at(occurrence++)));
      }
    }
    buf.push_back('\n');
    if (buf.size() >= chunk_bytes) {
      total += buf.size();
      write(std::string_view(buf));
      buf.clear();
    }
  }
  if (!buf.empty()) {
    total += buf.size();
    write(std::string_view(buf));
  }
  if (occurrence != corpus.labels.size()) {
    throw InvariantViolation("serialize_labeled: label count does not match target occurrences");
  }
  return total;
}

inline std::string serialize_to_string(const LabeledCorpus& corpus) {
  std::string out;
  out.reserve(corpus.serialized_bytes);
  serialize_labeled(corpus, [&](std::string_view chunk) { out.append(chunk); });
  return out;
}

/// Removes `_R` / `_D` suffixes from every token of a serialized corpus.
inline std::string strip_labels(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '_' && i + 1 < text.size() && (text[i + 1] == 'R' || text[i + 1] == 'D') &&
        (i + 2 == text.size() || text[i + 2] == ' ' || text[i + 2] == '\n')) {
      i += 2;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

}  // namespace semgap::mixer
