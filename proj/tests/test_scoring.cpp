#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pplcheck/ngram.hpp"
#include "pplcheck/scoring.hpp"
#include "test_support.hpp"

using namespace pplcheck;
namespace t = pplcheck::testing;

namespace {

std::shared_ptr<const NgramModel> model_from(const std::string& text, int order, double alpha) {
  std::istringstream in(text);
  return std::make_shared<const NgramModel>(train_ngram(in, order, alpha));
}

ClaimRecord rec(std::string id, std::string claim, std::string evidence, Label label = Label::Supported) {
  return {std::move(id), std::move(claim), std::move(evidence), label, std::nullopt};
}

std::string scores_text(const ScoresFile& f) {
  std::ostringstream out;
  write_scores(out, f);
  return out.str();
}

}  // namespace

TEST(Perplexity, HandExamples) {
  const std::vector<double> quarter = {std::log(0.25), std::log(0.25)};
  EXPECT_NEAR(perplexity_from_logprobs(quarter), 4.0, 1e-12);
  const std::vector<double> certain = {0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(perplexity_from_logprobs(certain), 1.0);
  const std::vector<double> mixed = {std::log(0.5), std::log(0.125)};
  EXPECT_NEAR(perplexity_from_logprobs(mixed), 4.0, 1e-12);
  EXPECT_THROW(perplexity_from_logprobs(std::span<const double>{}), Error);
}

TEST(Perplexity, UniformBackendGivesVocabularySize) {
  for (double v : {2.0, 4.0, 100.0, 50257.0}) {
    t::UniformBackend be(v);
    for (const char* claim : {"x", "a b c", "one two three four five six seven"}) {
      const auto s = score_claim(be, rec("r", claim, "evidence here"), ScoringMode::Causal, true);
      EXPECT_NEAR(s.perplexity, v, 1e-9 * v);
    }
  }
}

TEST(ScoreClaim, ConditionedOnEvidence) {
  NgramBackend be(model_from("a b a b", 2, 1.0));
  const auto s = score_claim(be, rec("r", "b", "a"), ScoringMode::Causal, true);
  EXPECT_EQ(s.claim_tokens, 1u);
  EXPECT_NEAR(s.perplexity, 1.0 / 0.6, 1e-12);
  EXPECT_FALSE(s.evidence_missing);
  const auto u = score_claim(be, rec("r", "b", "a"), ScoringMode::Causal, false);
  EXPECT_NE(u.perplexity, s.perplexity);
}

TEST(ScoreClaim, UnigramConditioningIsNoOp) {
  NgramBackend be(model_from("the virus spreads in the air\nmasks help\n", 1, 0.5));
  const auto c = score_claim(be, rec("r", "the virus helps", "masks help the air"), ScoringMode::Causal, true);
  const auto u = score_claim(be, rec("r", "the virus helps", "masks help the air"), ScoringMode::Causal, false);
  EXPECT_EQ(c.token_logprobs.logprobs(), u.token_logprobs.logprobs());
  EXPECT_EQ(c.perplexity, u.perplexity);
}

TEST(ScoreClaim, EmptyEvidenceFallsBackAndIsFlagged) {
  NgramBackend be(model_from("a b a b", 2, 1.0));
  const auto s = score_claim(be, rec("r", "b", "  "), ScoringMode::Causal, true);
  const auto u = score_claim(be, rec("r", "b", "  "), ScoringMode::Causal, false);
  EXPECT_TRUE(s.evidence_missing);
  EXPECT_FALSE(u.evidence_missing);
  EXPECT_EQ(s.perplexity, u.perplexity);
}

TEST(ScoreClaim, EmptyClaimIsEmptyTarget) {
  NgramBackend be(model_from("a b", 2, 1.0));
  try {
    score_claim(be, rec("bad", " ", "a"), ScoringMode::Causal, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyTarget);
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
}

TEST(ScoreDataset, KeepsOrderAndCollectsFailures) {
  NgramBackend be(model_from("a b c d", 2, 1.0));
  const Dataset ds("d", {rec("x", "a b", "c"), rec("y", "", "c"), rec("z", "d", "")});
  for (std::size_t jobs : {1u, 3u}) {
    const auto run = score_dataset(be, ds, ScoringMode::Causal, true, {.fail_fast = false, .jobs = jobs});
    ASSERT_EQ(run.scores.size(), 2u);
    EXPECT_EQ(run.scores[0].id, "x");
    EXPECT_EQ(run.scores[1].id, "z");
    ASSERT_EQ(run.failures.size(), 1u);
    EXPECT_EQ(run.failures[0].id, "y");
    EXPECT_EQ(run.failures[0].index, 1u);
    EXPECT_EQ(run.failures[0].kind, ErrorKind::EmptyTarget);
  }
  EXPECT_THROW(score_dataset(be, ds, ScoringMode::Causal, true, {.fail_fast = true}), Error);
}

TEST(ScoreDataset, ParallelMatchesSequential) {
  const auto fx = t::make_separable_fixture(60);
  NgramBackend be(std::make_shared<const NgramModel>(train_ngram(fx.corpus, 3, 0.1)));
  const auto a = score_dataset(be, fx.dataset, ScoringMode::Causal, true, {.jobs = 1});
  const auto b = score_dataset(be, fx.dataset, ScoringMode::Causal, true, {.jobs = 4});
  EXPECT_EQ(a.scores, b.scores);
}

TEST(ScoresFile, ByteIdenticalRoundTrip) {
  const auto fx = t::make_separable_fixture(30);
  NgramBackend be(std::make_shared<const NgramModel>(train_ngram(fx.corpus, 2, 0.5)));
  ScoresFile f;
  f.provenance = make_provenance(be, ScoringMode::Causal, true, "abc");
  f.provenance.created_at = "2024-01-01T00:00:00Z";
  f.scores = score_dataset(be, fx.dataset, ScoringMode::Causal, true).scores;
  f.failures.push_back({"gone", 3, ErrorKind::EmptyTarget, "claim is empty"});
  const auto text = scores_text(f);
  EXPECT_EQ(text, scores_text(f));

  std::istringstream in(text);
  const auto back = read_scores(in);
  EXPECT_EQ(back.scores, f.scores);
  ASSERT_EQ(back.failures.size(), 1u);
  EXPECT_EQ(back.failures[0].id, "gone");
  EXPECT_EQ(scores_text(back), text);
}

TEST(ScoresFile, TamperedPerplexityIsRejected) {
  t::UniformBackend be(4.0);
  ScoresFile f;
  f.provenance = make_provenance(be, ScoringMode::Causal, true, "h");
  f.scores.push_back(score_claim(be, rec("a", "x y", "e"), ScoringMode::Causal, true));
  const auto text = scores_text(f);
  const auto nl = text.find('\n');
  auto line = nlohmann::json::parse(text.substr(nl + 1));
  line["perplexity"] = line["perplexity"].get<double>() * 1.25;
  const auto tampered = text.substr(0, nl + 1) + line.dump() + "\n";
  std::istringstream in(tampered);
  EXPECT_THROW(read_scores(in), Error);
}

TEST(ScoresFile, ProvenanceMismatchIsRejected) {
  t::UniformBackend be(4.0);
  ScoresFile f;
  f.provenance = make_provenance(be, ScoringMode::Causal, true, "h");
  f.scores.push_back(score_claim(be, rec("a", "x y", "e"), ScoringMode::Causal, false));
  std::istringstream in(scores_text(f));
  EXPECT_THROW(read_scores(in), Error);
}

TEST(Provenance, HashCoversEveryField) {
  const auto base = provenance_hash("ngram", "m", ScoringMode::Causal, true, "tok");
  EXPECT_EQ(base.size(), 64u);
  EXPECT_EQ(base, provenance_hash("ngram", "m", ScoringMode::Causal, true, "tok"));
  EXPECT_NE(base, provenance_hash("remote", "m", ScoringMode::Causal, true, "tok"));
  EXPECT_NE(base, provenance_hash("ngram", "m2", ScoringMode::Causal, true, "tok"));
  EXPECT_NE(base, provenance_hash("ngram", "m", ScoringMode::Masked, true, "tok"));
  EXPECT_NE(base, provenance_hash("ngram", "m", ScoringMode::Causal, false, "tok"));
  EXPECT_NE(base, provenance_hash("ngram", "m", ScoringMode::Causal, true, "tok2"));
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
