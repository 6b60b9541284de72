#include <cmath>
#include <sstream>

#include "doctest.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/reference_backends.h"
#include "test_util.h"

using namespace rewriteqa;

TEST_CASE("n-gram scorer backs off bigram -> unigram -> unk") {
  NgramTableScorer s(-10.0);
  s.set_unigram("b", -2.0);
  s.set_unigram("a", -3.0);
  s.set_bigram("<s>", "a", -0.5);
  s.set_bigram("a", "b", -0.25);
  CHECK(s.score_sequence("a b").total_logprob == doctest::Approx(-0.75));
  CHECK(s.score_sequence("b a").total_logprob == doctest::Approx(-5.0));
  const auto sc = s.score_sequence("a b zzz?");
  CHECK(sc.total_logprob == doctest::Approx(-10.75));
  CHECK(sc.token_count == 3);
  CHECK(sc.normalized == doctest::Approx(-10.75 / 3));
  CHECK_THROWS_AS(s.score_sequence(" ? "), InvalidInputError);
}

TEST_CASE("n-gram table parsing") {
  std::stringstream ok("# comment\n\n-1.5\tx\n-0.5\tx y\n");
  const auto s = NgramTableScorer::from_stream(ok);
  CHECK(s.score_sequence("x y").total_logprob == doctest::Approx(-2.0));

  std::stringstream positive("-1\tx\n0.5\ty\n");
  try {
    NgramTableScorer::from_stream(positive);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::stringstream no_tab("-1 x\n");
  CHECK_THROWS_AS(NgramTableScorer::from_stream(no_tab), ParseError);
  std::stringstream trigram("-1\tx y z\n");
  CHECK_THROWS_AS(NgramTableScorer::from_stream(trigram), ParseError);
  CHECK_THROWS_AS(NgramTableScorer(0.5), ConfigError);
  CHECK_THROWS_AS(NgramTableScorer::from_file("/nonexistent/table.tsv"), ConfigError);
}

TEST_CASE("lookup QA keys on the normalized question") {
  LookupQA qa;
  qa.add("How tall is giraffe on average?", "15 feet");
  CHECK(qa.answer("how tall is giraffe on average") == "15 feet");
  CHECK(qa.answer("HOW TALL IS GIRAFFE ON AVERAGE??") == "15 feet");
  CHECK(qa.answer("how tall is zebra on average") == LookupQA::kUnknown);

  const auto table = LookupQA::from_file(testutil::fixture("qa_table.tsv"));
  CHECK(table.answer("what do zebras eat?") == "leaves");
  CHECK(table.answer("what famous founding father was known for his association with kite") ==
        "Benjamin Franklin");
}

TEST_CASE("hash embedder produces unit vectors") {
  HashEmbedder e(64);
  for (const char* s : {"15 feet", "", "the", "Benjamin Franklin", "a b c d e f g"}) {
    const auto v = e.embed(s);
    REQUIRE(v.size() == 64);
    double n = 0;
    for (double x : v) n += x * x;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(cosine(e.embed("The Leaves."), e.embed("leaves")) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(HashEmbedder(0), ConfigError);
}

TEST_CASE("cosine") {
  CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
  CHECK(cosine({0, 0}, {1, 0}) == 0.0);
  CHECK_THROWS_AS(cosine({1}, {1, 0}), ConfigError);
}

TEST_CASE("generation request validation and identity rewriter") {
  IdentityRewriter id;
  CHECK(id.generate({"what do zebras eat", 1, 1, 0}) == std::vector<std::string>{"what do zebras eat"});
  CHECK_THROWS_AS(id.generate({"x", 0, 1, 0}), InvalidInputError);
  CHECK_THROWS_AS(id.generate({"x", 3, 2, 0}), InvalidInputError);
}

TEST_CASE("fnv1a64 reference values") {
  // Published FNV-1a 64-bit test vectors.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
