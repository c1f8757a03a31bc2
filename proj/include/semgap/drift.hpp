#pragma once

// Per-word drift scores from neighbor overlap between two embedding spaces,
// ranking, and evaluation against annotated drift words.
//
//   S(w) = ln(min(f_r, f_d)) * (1 - J(N_r(w), N_d(w)))^p
//
// f_r and f_d are counts in the balanced (interleaved) corpus, N_x(w) the k
// nearest neighbors of w in space x.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "semgap/embed.hpp"
#include "semgap/error.hpp"
#include "semgap/textprep.hpp"

namespace semgap::drift {

struct DriftParams {
  std::size_t k = 30;
  double p = 5.0;

  void validate() const {
    if (k < 1) throw UsageError("drift: k must be >= 1");
    if (!(p >= 1.0)) throw UsageError("drift: p must be >= 1");
  }
};

using WordSet = std::set<std::string>;

inline double jaccard(const WordSet& a, const WordSet& b) {
  if (a.empty() && b.empty()) throw UsageError("jaccard of two empty sets is undefined");
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double score_from_jaccard(std::uint64_t f_r, std::uint64_t f_d, double j, double p) {
  if (f_r == 0 || f_d == 0) throw DataError("drift score needs nonzero frequencies in both sources");
  return std::log(static_cast<double>(std::min(f_r, f_d))) * std::pow(1.0 - j, p);
}

inline double score_word(std::uint64_t f_r, std::uint64_t f_d, const WordSet& nbrs_r,
                         const WordSet& nbrs_d, const DriftParams& params = {}) {
  params.validate();
  return score_from_jaccard(f_r, f_d, jaccard(nbrs_r, nbrs_d), params.p);
}

struct DriftRecord {
  std::string word;
  std::uint64_t f_r = 0;
  std::uint64_t f_d = 0;
  std::vector<std::string> nbrs_r;  // nearest first
  std::vector<std::string> nbrs_d;
  double jaccard = 0.0;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  std::uint64_t min_freq() const { return std::min(f_r, f_d); }
};

struct Ranking {
  std::vector<DriftRecord> records;  // by rank
  std::size_t shared_vocabulary = 0;
  std::size_t skipped_unbalanced = 0;  // shared words absent from one side of the balanced corpus
};

/// Scores every word present in both spaces and sorts by S descending, then
/// by min frequency descending, then lexicographically. `threads` > 1 splits
/// the neighbor queries over worker threads; the result does not change.
inline Ranking rank_words(const embed::EmbeddingSpace& space_r, const embed::EmbeddingSpace& space_d,
                          const VocabStats& balanced, const DriftParams& params = {},
                          std::size_t threads = 1) {
  params.validate();
  std::vector<std::string> shared;
  for (const auto& w : space_r.words()) {
    if (space_d.contains(w)) shared.push_back(w);
  }
  if (shared.empty()) throw DataError("drift: the two embedding spaces share no words");
  if (params.k >= space_r.size() || params.k >= space_d.size()) {
    throw UsageError("drift: k=" + std::to_string(params.k) + " is not smaller than the vocabulary (" +
                     std::to_string(space_r.size()) + " reviews, " + std::to_string(space_d.size()) +
                     " descriptions)");
  }
  Ranking out;
  out.shared_vocabulary = shared.size();
  std::vector<std::string> scored;
  for (const auto& w : shared) {
    const auto c = balanced.get(w);
    if (c.reviews == 0 || c.descriptions == 0) {
      ++out.skipped_unbalanced;
      continue;
    }
    scored.push_back(w);
  }
  out.records.resize(scored.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      DriftRecord& r = out.records[i];
      r.word = scored[i];
      const auto c = balanced.get(r.word);
      r.f_r = c.reviews;
      r.f_d = c.descriptions;
      for (auto& n : space_r.nearest_neighbors(r.word, params.k)) r.nbrs_r.push_back(std::move(n.word));
      for (auto& n : space_d.nearest_neighbors(r.word, params.k)) r.nbrs_d.push_back(std::move(n.word));
      r.jaccard = jaccard(WordSet(r.nbrs_r.begin(), r.nbrs_r.end()), WordSet(r.nbrs_d.begin(), r.nbrs_d.end()));
      r.score = score_from_jaccard(r.f_r, r.f_d, r.jaccard, params.p);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, scored.size()));
  if (threads == 1) {
    work(0, scored.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (scored.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = std::min(scored.size(), t * chunk);
      pool.emplace_back(work, b, std::min(scored.size(), b + chunk));
    }
    for (auto& th : pool) th.join();
  }
  std::stable_sort(out.records.begin(), out.records.end(), [](const DriftRecord& a, const DriftRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.min_freq() != b.min_freq()) return a.min_freq() > b.min_freq();
    return a.word < b.word;
  });
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].rank = i + 1;
  return out;
}

struct GroundTruthEntry {
  std::string word;
  std::string note;
};

/// Annotated drift words per domain, in file order.
struct GroundTruth {
  std::map<std::string, std::vector<GroundTruthEntry>> domains;

  const std::vector<GroundTruthEntry>* find(const std::string& domain) const {
    auto it = domains.find(domain);
    return it == domains.end() ? nullptr : &it->second;
  }

  std::vector<std::string> words(const std::string& domain) const {
    std::vector<std::string> out;
    if (const auto* e = find(domain)) {
      for (const auto& g : *e) out.push_back(g.word);
    }
    return out;
  }
};

/// TSV with columns domain, word and an optional note. A first line whose
/// first two fields are "domain" and "word" is treated as a header.
inline GroundTruth parse_ground_truth(std::istream& in, const std::string& origin = "ground truth") {
  GroundTruth gt;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::size_t b = 0;
    while (true) {
      const auto e = line.find('\t', b);
      cols.emplace_back(detail::trim(std::string_view(line).substr(b, e == std::string::npos ? e : e - b)));
      if (e == std::string::npos) break;
      b = e + 1;
    }
    if (line_no == 1 && cols.size() >= 2 && cols[0] == "domain" && cols[1] == "word") continue;
    if (cols.size() < 2 || cols[0].empty() || cols[1].empty()) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected domain<TAB>word[<TAB>note]");
    }
    gt.domains[cols[0]].push_back({cols[1], cols.size() > 2 ? cols[2] : std::string{}});
  }
  return gt;
}

inline GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground-truth file " + path.string());
  return parse_ground_truth(in, path.string());
}

struct AvgAtGt {
  double mean_score = 0.0;    // primary reading
  double mean_jaccard = 0.0;  // literal reading
  std::size_t prefix = 0;     // length of the minimal retrieving prefix
  std::size_t m = 0;
};

/// Averages over the shortest ranking prefix that contains the first `m`
/// ground-truth words.
inline AvgAtGt avg_score_at_gt(const std::vector<DriftRecord>& ranked,
                               const std::vector<std::string>& gt_words, std::size_t m = 10) {
  if (m == 0) throw UsageError("avg_score_at_gt: m must be >= 1");
  if (gt_words.size() < m) {
    throw DataError("avg_score_at_gt: ground truth has " + std::to_string(gt_words.size()) +
                    " words, need " + std::to_string(m));
  }
  std::set<std::string> wanted(gt_words.begin(), gt_words.begin() + static_cast<std::ptrdiff_t>(m));
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < ranked.size(); ++i) position.emplace(ranked[i].word, i);
  std::string missing;
  std::size_t last = 0;
  for (const auto& w : wanted) {
    auto it = position.find(w);
    if (it == position.end()) {
      missing += (missing.empty() ? "" : ", ") + w;
    } else {
      last = std::max(last, it->second);
    }
  }
  if (!missing.empty()) throw DataError("ground-truth words missing from the ranking: " + missing);
  AvgAtGt out;
  out.m = m;
  out.prefix = last + 1;
  for (std::size_t i = 0; i < out.prefix; ++i) {
    out.mean_score += ranked[i].score;
    out.mean_jaccard += ranked[i].jaccard;
  }
  out.mean_score /= static_cast<double>(out.prefix);
  out.mean_jaccard /= static_cast<double>(out.prefix);
  return out;
}

struct PlantedEval {
  double auc = 0.0;
  std::size_t planted_ranked = 0;
  std::size_t planted_missing = 0;  // planted words not in the ranking
  std::size_t top_n = 0;            // most frequent planted words considered
  std::size_t top_n_in_top_decile = 0;
};

/// Mann-Whitney AUC of planted vs. other ranked words (higher S = positive),
/// and how many of the `top_n` most frequent planted words rank within the
/// first tenth of the list.
inline PlantedEval evaluate_planted(const std::vector<DriftRecord>& ranked,
                                    const std::vector<std::string>& planted, std::size_t top_n = 10) {
  const std::set<std::string> plant(planted.begin(), planted.end());
  std::vector<double> pos, neg;
  std::vector<const DriftRecord*> hits;
  for (const auto& r : ranked) {
    if (plant.count(r.word)) {
      pos.push_back(r.score);
      hits.push_back(&r);
    } else {
      neg.push_back(r.score);
    }
  }
  PlantedEval ev;
  ev.planted_ranked = pos.size();
  ev.planted_missing = plant.size() - pos.size();
  if (pos.empty() || neg.empty()) throw DataError("planted evaluation needs planted and non-planted words");
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  ev.auc = wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));

  std::stable_sort(hits.begin(), hits.end(), [](const DriftRecord* a, const DriftRecord* b) {
    const auto fa = a->f_r + a->f_d, fb = b->f_r + b->f_d;
    if (fa != fb) return fa > fb;
    return a->word < b->word;
  });
  ev.top_n = std::min(top_n, hits.size());
  const std::size_t decile = (ranked.size() + 9) / 10;
  for (std::size_t i = 0; i < ev.top_n; ++i) ev.top_n_in_top_decile += hits[i]->rank <= decile;
  return ev;
}

}  // namespace semgap::drift
