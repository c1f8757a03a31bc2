#pragma once

// CBOW word embeddings with negative sampling, and cosine k-NN queries.
//
// Training follows the usual word2vec recipe: per-position window shrinking,
// a unigram^0.75 noise distribution, frequent-word subsampling and a learning
// rate decaying linearly over all planned updates. The context vector is the
// mean of the input vectors in the window. With threads == 1 training is
// fully deterministic for a given seed.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "semgap/error.hpp"
#include "semgap/textprep.hpp"

namespace semgap::embed {

struct TrainParams {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t epochs = 5;
  std::uint64_t min_count = 5;
  std::size_t negative = 5;
  double subsample_threshold = 1e-3;
  double lr_start = 0.025;
  double lr_end = 0.0001;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // > 1 enables lock-free parallel updates (nondeterministic)

  static TrainParams reviews_defaults() {
    TrainParams p;
    p.dim = 200;
    p.epochs = 5;
    p.min_count = 50;
    return p;
  }

  static TrainParams descriptions_defaults() {
    TrainParams p;
    p.dim = 50;
    p.epochs = 10;
    p.min_count = 10;
    return p;
  }

  void validate() const {
    if (dim < 1) throw UsageError("embedding dim must be >= 1");
    if (window < 1) throw UsageError("window must be >= 1");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(lr_start > lr_end && lr_end > 0.0)) throw UsageError("need lr_start > lr_end > 0");
    if (threads < 1) throw UsageError("threads must be >= 1");
  }
};

/// No such word in the space's vocabulary.
class LookupError : public DataError {
 public:
  explicit LookupError(const std::string& word)
      : DataError("word not in embedding vocabulary: " + word) {}
};

struct Neighbor {
  std::string word;
  double cosine = 0.0;
};

class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;

  EmbeddingSpace(std::vector<std::string> words, std::vector<std::uint64_t> counts,
                 std::vector<float> vectors, std::size_t dim, TrainParams params = {})
      : words_(std::move(words)),
        counts_(std::move(counts)),
        vectors_(std::move(vectors)),
        dim_(dim),
        params_(params) {
    if (counts_.size() != words_.size() || vectors_.size() != words_.size() * dim_) {
      throw UsageError("EmbeddingSpace: inconsistent vocabulary and matrix sizes");
    }
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], i).second) {
        throw DataError("EmbeddingSpace: duplicate word " + words_[i]);
      }
    }
    for (float v : vectors_) {
      if (!std::isfinite(v)) throw InvariantViolation("EmbeddingSpace: non-finite vector entry");
    }
    compute_norms();
  }

  std::size_t size() const { return words_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  const std::vector<float>& matrix() const { return vectors_; }
  const TrainParams& params() const { return params_; }

  /// Mean training loss per epoch.
  const std::vector<double>& epoch_loss() const { return epoch_loss_; }
  void set_epoch_loss(std::vector<double> loss) { epoch_loss_ = std::move(loss); }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }

  std::size_t index_of(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) throw LookupError(w);
    return it->second;
  }

  std::span<const float> vector(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }

  double cosine(std::size_t a, std::size_t b) const {
    if (norms_[a] == 0.0 || norms_[b] == 0.0) return 0.0;
    double dot = 0.0;
    const float* va = vectors_.data() + a * dim_;
    const float* vb = vectors_.data() + b * dim_;
    for (std::size_t d = 0; d < dim_; ++d) dot += static_cast<double>(va[d]) * vb[d];
    return dot / (norms_[a] * norms_[b]);
  }

  /// Top-k words by cosine similarity, excluding the query itself. Ties go
  /// to the more frequent word, then the lexicographically smaller one.
  std::vector<Neighbor> nearest_neighbors(const std::string& word, std::size_t k) const {
    const std::size_t q = index_of(word);
    if (k >= size()) {
      throw UsageError("k=" + std::to_string(k) + " must be smaller than the vocabulary size " +
                       std::to_string(size()));
    }
    struct Cand {
      std::size_t idx;
      double cos;
    };
    std::vector<Cand> cands;
    cands.reserve(size() - 1);
    for (std::size_t i = 0; i < size(); ++i) {
      if (i != q) cands.push_back({i, cosine(q, i)});
    }
    auto better = [&](const Cand& a, const Cand& b) {
      if (a.cos != b.cos) return a.cos > b.cos;
      if (counts_[a.idx] != counts_[b.idx]) return counts_[a.idx] > counts_[b.idx];
      return words_[a.idx] < words_[b.idx];
    };
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), better);
    std::vector<Neighbor> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back({words_[cands[i].idx], cands[i].cos});
    return out;
  }

  // Binary layout, all integers and floats little-endian:
  //   "SGEMB001" | u32 dim | u64 vocab
  //   per word: u32 byte length | UTF-8 bytes | u64 frequency | dim x f32
  void save_binary(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kMagic, 8);
    put_le(out, static_cast<std::uint32_t>(dim_));
    put_le(out, static_cast<std::uint64_t>(size()));
    for (std::size_t i = 0; i < size(); ++i) {
      put_le(out, static_cast<std::uint32_t>(words_[i].size()));
      out.write(words_[i].data(), static_cast<std::streamsize>(words_[i].size()));
      put_le(out, counts_[i]);
      for (float v : vector(i)) put_le(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) throw DataError("write failed for " + path.string());
  }

  static EmbeddingSpace load_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
      throw DataError(path.string() + ": not an embedding file");
    }
    const auto dim = get_le<std::uint32_t>(in);
    const auto n = get_le<std::uint64_t>(in);
    std::vector<std::string> words(n);
    std::vector<std::uint64_t> counts(n);
    std::vector<float> vecs(n * dim);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto len = get_le<std::uint32_t>(in);
      words[i].resize(len);
      in.read(words[i].data(), len);
      counts[i] = get_le<std::uint64_t>(in);
      for (std::uint32_t d = 0; d < dim; ++d) {
        vecs[i * dim + d] = std::bit_cast<float>(get_le<std::uint32_t>(in));
      }
      if (!in) throw DataError(path.string() + ": truncated embedding file");
    }
    return EmbeddingSpace(std::move(words), std::move(counts), std::move(vecs), dim);
  }

  /// One line per word: the word followed by its space-separated components.
  void save_text(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    char buf[32];
    for (std::size_t i = 0; i < size(); ++i) {
      out << words_[i];
      for (float v : vector(i)) {
        std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
        out << buf;
      }
      out << '\n';
    }
  }

 private:
  static constexpr char kMagic[9] = "SGEMB001";

  template <typename T>
  static void put_le(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
  }

  template <typename T>
  static T get_le(std::istream& in) {
    unsigned char b[sizeof(T)] = {};
    in.read(reinterpret_cast<char*>(b), sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
    return v;
  }

  void compute_norms() {
    norms_.assign(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      double s = 0.0;
      for (float v : vector(i)) s += static_cast<double>(v) * v;
      norms_[i] = std::sqrt(s);
    }
  }

  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::vector<float> vectors_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
  TrainParams params_;
  std::vector<double> epoch_loss_;
};

namespace detail {

// Plain loads and stores for the deterministic single-threaded path.
struct PlainAccess {
  static float load(const float& x) { return x; }
  static void add(float& x, float v) { x += v; }
};

// Relaxed atomic accesses for lock-free parallel training: updates may be
// lost or interleaved, but there is no data race.
struct RelaxedAccess {
  static float load(const float& x) {
    return std::atomic_ref<float>(const_cast<float&>(x)).load(std::memory_order_relaxed);
  }
  static void add(float& x, float v) {
    std::atomic_ref<float> ref(x);
    ref.store(ref.load(std::memory_order_relaxed) + v, std::memory_order_relaxed);
  }
};

struct Model {
  std::size_t dim = 0;
  std::vector<float> input;   // vocab x dim
  std::vector<float> output;  // vocab x dim, negative-sampling weights
  std::vector<double> noise_cdf;
  std::vector<double> keep_prob;
};

inline std::size_t sample_noise(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

struct ShardResult {
  double loss = 0.0;
  std::uint64_t samples = 0;
};

// Trains on sentences [begin, end) of the mapped corpus for one epoch.
template <typename Access>
ShardResult train_shard(Model& m, const std::vector<std::vector<std::uint32_t>>& sentences,
                        std::size_t begin, std::size_t end, const TrainParams& p,
                        std::mt19937_64& rng, std::atomic<std::uint64_t>& processed,
                        std::uint64_t total_planned) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::uint32_t> kept;
  std::vector<float> neu1(m.dim), neu1e(m.dim);
  ShardResult res;
  const std::size_t dim = m.dim;
  for (std::size_t s = begin; s < end; ++s) {
    const auto& sent = sentences[s];
    const std::uint64_t done = processed.fetch_add(sent.size(), std::memory_order_relaxed);
    const double progress = std::min(1.0, static_cast<double>(done) / static_cast<double>(total_planned));
    const float lr = static_cast<float>(p.lr_start - (p.lr_start - p.lr_end) * progress);
    kept.clear();
    for (auto w : sent) {
      if (p.subsample_threshold > 0.0 && m.keep_prob[w] < 1.0 && m.keep_prob[w] < unif(rng)) continue;
      kept.push_back(w);
    }
    for (std::size_t pos = 0; pos < kept.size(); ++pos) {
      const std::size_t reduced = rng() % p.window;
      const std::size_t span = p.window - reduced;
      const std::size_t lo = pos >= span ? pos - span : 0;
      const std::size_t hi = std::min(kept.size() - 1, pos + span);
      std::fill(neu1.begin(), neu1.end(), 0.0f);
      std::size_t n_ctx = 0;
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        const float* in = m.input.data() + static_cast<std::size_t>(kept[c]) * dim;
        for (std::size_t d = 0; d < dim; ++d) neu1[d] += Access::load(in[d]);
        ++n_ctx;
      }
      if (n_ctx == 0) continue;
      const float inv = 1.0f / static_cast<float>(n_ctx);
      for (auto& v : neu1) v *= inv;
      std::fill(neu1e.begin(), neu1e.end(), 0.0f);
      double loss = 0.0;
      for (std::size_t d = 0; d <= p.negative; ++d) {
        std::size_t target;
        float label;
        if (d == 0) {
          target = kept[pos];
          label = 1.0f;
        } else {
          target = sample_noise(m.noise_cdf, unif(rng));
          if (target == kept[pos]) continue;
          label = 0.0f;
        }
        float* out = m.output.data() + target * dim;
        double f = 0.0;
        for (std::size_t k = 0; k < dim; ++k) f += static_cast<double>(neu1[k]) * Access::load(out[k]);
        loss -= log_sigmoid(label > 0.5f ? f : -f);
        const double sig = 1.0 / (1.0 + std::exp(-f));
        const float g = static_cast<float>((label - sig) * lr);
        for (std::size_t k = 0; k < dim; ++k) neu1e[k] += g * Access::load(out[k]);
        for (std::size_t k = 0; k < dim; ++k) Access::add(out[k], g * neu1[k]);
      }
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        float* in = m.input.data() + static_cast<std::size_t>(kept[c]) * dim;
        for (std::size_t k = 0; k < dim; ++k) Access::add(in[k], neu1e[k]);
      }
      res.loss += loss;
      ++res.samples;
    }
  }
  return res;
}

}  // namespace detail

/// Trains one embedding space on every sentence of `corpus`.
inline EmbeddingSpace train_cbow(const Corpus& corpus, const TrainParams& p,
                                 std::string* warning = nullptr) {
  p.validate();
  // Vocabulary: min_count filter, ordered by descending count then word.
  std::vector<std::uint64_t> raw(corpus.lexicon->size(), 0);
  for (auto id : corpus.tokens) ++raw[id];
  std::vector<std::uint32_t> kept_ids;
  for (std::uint32_t id = 0; id < raw.size(); ++id) {
    if (raw[id] >= p.min_count && raw[id] > 0) kept_ids.push_back(id);
  }
  if (kept_ids.empty()) {
    throw UsageError("train_cbow: no word reaches min_count=" + std::to_string(p.min_count));
  }
  const auto& lex = *corpus.lexicon;
  std::sort(kept_ids.begin(), kept_ids.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (raw[a] != raw[b]) return raw[a] > raw[b];
    return lex.word(a) < lex.word(b);
  });
  std::vector<std::int64_t> to_vocab(raw.size(), -1);
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  for (std::size_t i = 0; i < kept_ids.size(); ++i) {
    to_vocab[kept_ids[i]] = static_cast<std::int64_t>(i);
    words.push_back(lex.word(kept_ids[i]));
    counts.push_back(raw[kept_ids[i]]);
  }
  const std::size_t vocab = words.size();

  std::vector<std::vector<std::uint32_t>> sentences;
  sentences.reserve(corpus.size());
  std::uint64_t train_words = 0;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    std::vector<std::uint32_t> mapped;
    for (auto id : corpus.sentence(s)) {
      if (to_vocab[id] >= 0) mapped.push_back(static_cast<std::uint32_t>(to_vocab[id]));
    }
    train_words += mapped.size();
    if (!mapped.empty()) sentences.push_back(std::move(mapped));
  }
  if (warning && train_words < 10 * p.dim) {
    *warning = "corpus has " + std::to_string(train_words) + " in-vocabulary tokens, fewer than 10x dim=" +
               std::to_string(p.dim) + "; vectors will be noisy";
  }

  detail::Model m;
  m.dim = p.dim;
  std::mt19937_64 init_rng(p.seed);
  std::uniform_real_distribution<float> init(-0.5f, 0.5f);
  m.input.resize(vocab * p.dim);
  for (auto& v : m.input) v = init(init_rng) / static_cast<float>(p.dim);
  m.output.assign(vocab * p.dim, 0.0f);
  m.noise_cdf.resize(vocab);
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab; ++i) {
    acc += std::pow(static_cast<double>(counts[i]), 0.75);
    m.noise_cdf[i] = acc;
  }
  m.keep_prob.resize(vocab, 1.0);
  if (p.subsample_threshold > 0.0) {
    const double t = p.subsample_threshold * static_cast<double>(train_words);
    for (std::size_t i = 0; i < vocab; ++i) {
      const double c = static_cast<double>(counts[i]);
      m.keep_prob[i] = (std::sqrt(c / t) + 1.0) * t / c;
    }
  }

  const std::uint64_t total_planned = std::max<std::uint64_t>(1, train_words * p.epochs);
  std::atomic<std::uint64_t> processed{0};
  std::vector<double> epoch_loss;
  std::mt19937_64 rng(p.seed ^ 0x9E3779B97F4A7C15ULL);
  for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
    detail::ShardResult total;
    if (p.threads == 1) {
      total = detail::train_shard<detail::PlainAccess>(m, sentences, 0, sentences.size(), p, rng,
                                                       processed, total_planned);
    } else {
      std::vector<detail::ShardResult> parts(p.threads);
      std::vector<std::thread> pool;
      const std::size_t chunk = (sentences.size() + p.threads - 1) / p.threads;
      for (std::size_t t = 0; t < p.threads; ++t) {
        pool.emplace_back([&, t] {
          std::mt19937_64 local(p.seed + 7919 * (epoch * p.threads + t + 1));
          const std::size_t b = std::min(sentences.size(), t * chunk);
          const std::size_t e = std::min(sentences.size(), b + chunk);
          parts[t] = detail::train_shard<detail::RelaxedAccess>(m, sentences, b, e, p, local,
                                                                processed, total_planned);
        });
      }
      for (auto& th : pool) th.join();
      for (const auto& r : parts) {
        total.loss += r.loss;
        total.samples += r.samples;
      }
    }
    epoch_loss.push_back(total.samples ? total.loss / static_cast<double>(total.samples) : 0.0);
  }

  EmbeddingSpace space(std::move(words), std::move(counts), std::move(m.input), p.dim, p);
  space.set_epoch_loss(std::move(epoch_loss));
  return space;
}

}  // namespace semgap::embed
