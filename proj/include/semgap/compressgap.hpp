#pragma once

// Compressed-size measurement of True/Rand corpora and the trend-residual
// gap score.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <boost/iostreams/categories.hpp>
#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <boost/version.hpp>

#include "semgap/error.hpp"
#include "semgap/mixer.hpp"
#include "semgap/stats.hpp"

namespace semgap::compress {

struct CompressorSpec {
  std::string format = "bzip2";
  int level = 9;  // block size in units of 100k

  void validate() const {
    if (format != "bzip2") throw UsageError("unsupported compressor format: " + format);
    if (level < 1 || level > 9) throw UsageError("bzip2 level must lie in 1..9");
  }

  std::string identity() const {
    return format + " -" + std::to_string(level) + " (libbz2 via Boost.Iostreams " +
           BOOST_LIB_VERSION + ")";
  }
};

namespace detail {

struct CountingSink {
  using char_type = char;
  using category = boost::iostreams::sink_tag;
  std::uint64_t* count;
  std::streamsize write(const char*, std::streamsize n) {
    *count += static_cast<std::uint64_t>(n);
    return n;
  }
};

}  // namespace detail

/// Streaming compressor that only keeps track of how many compressed bytes
/// it has produced. Memory use is bounded by the codec's block size.
class CompressedSizeCounter {
 public:
  explicit CompressedSizeCounter(const CompressorSpec& spec) {
    spec.validate();
    boost::iostreams::bzip2_params params(spec.level);
    stream_ = std::make_unique<boost::iostreams::filtering_ostream>();
    stream_->push(boost::iostreams::bzip2_compressor(params));
    stream_->push(detail::CountingSink{&compressed_});
  }

  void write(std::string_view bytes) {
    stream_->write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    raw_ += bytes.size();
    if (!*stream_) throw DataError("compressor write failed");
  }

  /// Flushes the codec and returns the final compressed length.
  std::uint64_t finish() {
    if (stream_) {
      stream_->reset();
      stream_.reset();
    }
    return compressed_;
  }

  std::uint64_t raw_bytes() const { return raw_; }

 private:
  std::unique_ptr<boost::iostreams::filtering_ostream> stream_;
  std::uint64_t compressed_ = 0;
  std::uint64_t raw_ = 0;
};

inline std::uint64_t compress_size(std::string_view data, const CompressorSpec& spec = {}) {
  CompressedSizeCounter counter(spec);
  counter.write(data);
  return counter.finish();
}

struct GapMeasurement {
  std::string domain;
  std::uint64_t raw_size = 0;
  std::uint64_t c_true = 0;
  double c_rand_mean = 0.0;
  double c_rand_std = 0.0;  // population std over trials
  std::vector<std::uint64_t> c_rand;
  double delta = 0.0;
  double rel_delta = 0.0;
  double compression_ratio = 0.0;
  std::size_t trials = 0;
  std::size_t target_words = 0;
  std::uint64_t target_occurrences = 0;
};

struct CompressedCorpus {
  std::uint64_t raw = 0;
  std::uint64_t compressed = 0;
};

/// Serializes a labeled corpus straight into the compressor. `tee`, when
/// set, also receives every chunk (used to keep the corpus on disk).
inline CompressedCorpus compress_labeled(
    const mixer::LabeledCorpus& corpus, const CompressorSpec& spec,
    const std::function<void(std::string_view)>& tee = {}) {
  CompressedSizeCounter counter(spec);
  const auto written = mixer::serialize_labeled(corpus, [&](std::string_view chunk) {
    counter.write(chunk);
    if (tee) tee(chunk);
  });
  if (written != corpus.serialized_bytes) {
    throw InvariantViolation("serialized length differs from the precomputed corpus size");
  }
  return {written, counter.finish()};
}

/// Callback receiving each labeled corpus before compression, with a tag of
/// "true" or "rand-t<trial>". Returning a non-empty function tees the bytes.
using CorpusTap =
    std::function<std::function<void(std::string_view)>(const std::string& tag)>;

/// Compresses the True corpus and every Rand trial of one mixed corpus.
inline GapMeasurement measure_gap(std::string domain,
                                  std::shared_ptr<const mixer::MixedCorpus> mixed,
                                  const mixer::TargetVocabulary& targets,
                                  const mixer::RandomizationParams& rand,
                                  const CompressorSpec& spec, const CorpusTap& tap = {}) {
  rand.validate();
  spec.validate();
  auto mask = mixer::target_mask(*mixed, targets);

  GapMeasurement m;
  m.domain = std::move(domain);
  m.trials = rand.trials;
  m.target_words = targets.size();

  const auto truth = mixer::label_corpus(mixed, mask, mixer::Variant::kTrue, rand);
  const auto t = compress_labeled(truth, spec, tap ? tap("true") : nullptr);
  m.raw_size = t.raw;
  m.c_true = t.compressed;
  m.target_occurrences = truth.labels.size();
  if (m.raw_size == 0) throw DataError(m.domain + ": empty mixed corpus");

  for (std::size_t trial = 0; trial < rand.trials; ++trial) {
    const auto shuffled = mixer::label_corpus(mixed, mask, mixer::Variant::kRand, rand, trial);
    if (shuffled.serialized_bytes != truth.serialized_bytes ||
        shuffled.n_r + shuffled.n_d != truth.n_r + truth.n_d) {
      throw InvariantViolation(m.domain + ": Rand corpus differs in size from True corpus");
    }
    const auto r = compress_labeled(shuffled, spec,
                                    tap ? tap("rand-t" + std::to_string(trial)) : nullptr);
    if (r.raw != m.raw_size) {
      throw InvariantViolation(m.domain + ": raw size mismatch between True and Rand");
    }
    m.c_rand.push_back(r.compressed);
  }

  const double n = static_cast<double>(m.c_rand.size());
  double sum = 0.0;
  for (auto c : m.c_rand) sum += static_cast<double>(c);
  m.c_rand_mean = sum / n;
  double ss = 0.0;
  for (auto c : m.c_rand) {
    const double d = static_cast<double>(c) - m.c_rand_mean;
    ss += d * d;
  }
  m.c_rand_std = std::sqrt(ss / n);
  m.delta = m.c_rand_mean - static_cast<double>(m.c_true);
  m.rel_delta = m.delta / static_cast<double>(m.c_true);
  m.compression_ratio = static_cast<double>(m.c_true) / static_cast<double>(m.raw_size);
  return m;
}

struct GapScoreRow {
  std::string domain;
  double compression_ratio = 0.0;
  double rel_delta = 0.0;
  double gap_score = 0.0;
  std::size_t rank = 0;  // 1 = largest gap
};

struct GapScoreTable {
  std::vector<GapScoreRow> rows;  // input order
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  bool degenerate = false;
  std::string warning;

  /// Rows sorted by rank.
  std::vector<GapScoreRow> ranked() const {
    auto out = rows;
    std::sort(out.begin(), out.end(),
              [](const GapScoreRow& a, const GapScoreRow& b) { return a.rank < b.rank; });
    return out;
  }
};

/// Residuals of rel_delta around its least-squares trend on compression ratio.
inline GapScoreTable fit_gap_scores(const std::vector<GapMeasurement>& measurements) {
  if (measurements.size() < 3) {
    throw UsageError("gap scores need at least 3 domains, got " +
                     std::to_string(measurements.size()));
  }
  std::vector<double> x, y;
  for (const auto& m : measurements) {
    x.push_back(m.compression_ratio);
    y.push_back(m.rel_delta);
  }
  GapScoreTable table;
  std::vector<double> residuals;
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) {
    table.degenerate = true;
    table.warning = "all compression ratios are identical; gap score falls back to rel_delta - mean";
    table.intercept = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    for (double v : y) residuals.push_back(v - table.intercept);
  } else {
    auto fit = stats::ols(x, y);
    table.intercept = fit.intercept;
    table.slope = fit.slope;
    table.r_squared = fit.r_squared;
    residuals = std::move(fit.residuals);
  }
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    table.rows.push_back({measurements[i].domain, x[i], y[i], residuals[i], 0});
  }
  std::vector<std::size_t> order(table.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (table.rows[a].gap_score != table.rows[b].gap_score) {
      return table.rows[a].gap_score > table.rows[b].gap_score;
    }
    return table.rows[a].domain < table.rows[b].domain;
  });
  for (std::size_t r = 0; r < order.size(); ++r) table.rows[order[r]].rank = r + 1;
  return table;
}

}  // namespace semgap::compress
