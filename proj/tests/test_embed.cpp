#include <catch_amalgamated.hpp>

#include <random>

#include "semgap/embed.hpp"
#include "support.hpp"

using namespace semgap;
using namespace semgap::embed;

namespace {

// "cat" and "dog" share context templates; "rock" lives in disjoint ones.
Corpus toy_corpus(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> pets{"fed", "the", "hungry", "little", "pet", "purred", "barked", "cuddled", "vet"};
  const std::vector<std::string> geo{"granite", "mountain", "quarry", "heavy", "stone", "cliff", "mineral", "basalt"};
  Corpus c;
  for (int i = 0; i < 3000; ++i) {
    std::vector<std::string> s;
    const int kind = static_cast<int>(rng() % 3);
    const auto& ctx = kind == 2 ? geo : pets;
    const std::string centre = kind == 0 ? "cat" : kind == 1 ? "dog" : "rock";
    for (int k = 0; k < 3; ++k) s.push_back(ctx[rng() % ctx.size()]);
    s.push_back(centre);
    for (int k = 0; k < 3; ++k) s.push_back(ctx[rng() % ctx.size()]);
    c.add(Source::kReview, s);
  }
  c.add(Source::kReview, {"rare", "rare", "rare", "rare"});  // 4 occurrences
  return c;
}

TrainParams toy_params() {
  TrainParams p;
  p.dim = 24;
  p.window = 3;
  p.epochs = 5;
  p.min_count = 5;
  p.seed = 4;
  return p;
}

}  // namespace

TEST_CASE("words in shared contexts end up closer") {
  const auto space = train_cbow(toy_corpus(1), toy_params());
  const auto cat = space.index_of("cat"), dog = space.index_of("dog"), rock = space.index_of("rock");
  CHECK(space.cosine(cat, dog) > space.cosine(cat, rock));
  CHECK(space.cosine(dog, cat) > space.cosine(dog, rock));
  const auto loss = space.epoch_loss();
  REQUIRE(loss.size() == 5);
  CHECK(loss.back() < loss.front());
}

TEST_CASE("single-threaded training is bitwise reproducible") {
  const auto corpus = toy_corpus(2);
  const auto a = train_cbow(corpus, toy_params());
  const auto b = train_cbow(corpus, toy_params());
  CHECK(a.words() == b.words());
  CHECK(a.matrix() == b.matrix());
  auto other = toy_params();
  other.seed = 5;
  CHECK(train_cbow(corpus, other).matrix() != a.matrix());
}

TEST_CASE("multi-threaded training produces a usable space") {
  auto p = toy_params();
  p.threads = 3;
  const auto space = train_cbow(toy_corpus(3), p);
  CHECK(space.cosine(space.index_of("cat"), space.index_of("dog")) >
        space.cosine(space.index_of("cat"), space.index_of("rock")));
}

TEST_CASE("vocabulary respects min_count and frequency order") {
  const auto space = train_cbow(toy_corpus(1), toy_params());
  CHECK_FALSE(space.contains("rare"));
  CHECK_THROWS_AS(space.index_of("rare"), LookupError);
  for (std::size_t i = 1; i < space.size(); ++i) CHECK(space.counts()[i - 1] >= space.counts()[i]);
  auto p = toy_params();
  p.min_count = 4;
  CHECK(train_cbow(toy_corpus(1), p).contains("rare"));
  p.min_count = 100000;
  CHECK_THROWS_AS(train_cbow(toy_corpus(1), p), UsageError);
}

TEST_CASE("small corpora produce a warning") {
  Corpus c;
  for (int i = 0; i < 10; ++i) c.add(Source::kReview, {"a", "b", "c"});
  std::string warning;
  auto p = toy_params();
  p.min_count = 1;
  train_cbow(c, p, &warning);
  CHECK_FALSE(warning.empty());
}

TEST_CASE("nearest neighbors") {
  // a and b identical, c orthogonal, d opposite
  EmbeddingSpace s({"a", "b", "c", "d"}, {4, 3, 2, 1}, {1, 0, 1, 0, 0, 1, -1, 0}, 2);
  const auto n = s.nearest_neighbors("a", 3);
  REQUIRE(n.size() == 3);
  CHECK(n[0].word == "b");
  CHECK(n[0].cosine == Catch::Approx(1.0));
  CHECK(n[1].word == "c");
  CHECK(n[2].word == "d");
  CHECK(s.nearest_neighbors("a", 1).front().word == "b");
  CHECK_THROWS_AS(s.nearest_neighbors("a", 4), UsageError);
  CHECK_THROWS_AS(s.nearest_neighbors("zzz", 1), LookupError);

  // equal cosines go to the more frequent word, then alphabetically
  EmbeddingSpace t({"q", "y", "x", "z"}, {9, 1, 1, 5}, {1, 0, 1, 0, 1, 0, 1, 0}, 2);
  const auto tn = t.nearest_neighbors("q", 3);
  CHECK(tn[0].word == "z");
  CHECK(tn[1].word == "x");
  CHECK(tn[2].word == "y");
}

TEST_CASE("binary and text round trips") {
  testsupport::TempDir dir("embed");
  const auto space = train_cbow(toy_corpus(1), toy_params());
  space.save_binary(dir / "v.bin");
  const auto back = EmbeddingSpace::load_binary(dir / "v.bin");
  CHECK(back.words() == space.words());
  CHECK(back.counts() == space.counts());
  CHECK(back.matrix() == space.matrix());
  CHECK(back.dim() == space.dim());

  space.save_text(dir / "v.txt");
  std::ifstream in(dir / "v.txt");
  std::string word;
  in >> word;
  CHECK(word == space.words().front());
  std::vector<double> first(space.dim());
  for (auto& v : first) in >> v;
  for (std::size_t d = 0; d < space.dim(); ++d) CHECK(static_cast<float>(first[d]) == space.vector(0)[d]);

  std::ofstream(dir / "junk.bin") << "not an embedding";
  CHECK_THROWS_AS(EmbeddingSpace::load_binary(dir / "junk.bin"), DataError);
}

TEST_CASE("parameter validation") {
  TrainParams p;
  p.dim = 0;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = {};
  p.lr_end = p.lr_start;
  CHECK_THROWS_AS(p.validate(), UsageError);
  CHECK(TrainParams::reviews_defaults().dim == 200);
  CHECK(TrainParams::reviews_defaults().min_count == 50);
  CHECK(TrainParams::descriptions_defaults().dim == 50);
  CHECK(TrainParams::descriptions_defaults().window == 5);
  CHECK(TrainParams::descriptions_defaults().epochs == 10);
  CHECK(TrainParams::descriptions_defaults().min_count == 10);
}
