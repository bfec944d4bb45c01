#include <gtest/gtest.h>

#include <cmath>
#include <future>

#include "pplcheck/remote_backend.hpp"
#include "pplcheck/scoring.hpp"
#include "test_support.hpp"

using namespace pplcheck;
using pplcheck::testing::FakeSidecar;

namespace {

RemoteOptions opts(const FakeSidecar& fake, std::string model = "fake-causal") {
  RemoteOptions o;
  o.base_url = fake.url();
  o.model = std::move(model);
  o.backoff = std::chrono::milliseconds(5);
  return o;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::Validation;
}

}  // namespace

TEST(RemoteBackend, CausalScoring) {
  FakeSidecar fake;
  RemoteBackend be(opts(fake));
  const auto lp = score_causal(be, "some evidence", "virus spreads fast");
  ASSERT_EQ(lp.token_count(), 3u);
  EXPECT_EQ(lp.tokens()[1], "spreads");
  EXPECT_DOUBLE_EQ(lp.logprobs()[0], FakeSidecar::causal_logprob("virus", 2));
  EXPECT_DOUBLE_EQ(lp.logprobs()[2], FakeSidecar::causal_logprob("fast", 4));
}

TEST(RemoteBackend, MaskedReturnsOneEntryPerClaimToken) {
  FakeSidecar fake;
  RemoteBackend be(opts(fake, "fake-both"));
  const auto lp = score_masked(be, "ctx", "a bb ccc dddd");
  ASSERT_EQ(lp.token_count(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(lp.logprobs()[i], -std::log(4.0 + static_cast<double>(i)));
}

TEST(RemoteBackend, MaskedOnCausalModelIsUnsupportedMode) {
  FakeSidecar fake;
  RemoteBackend be(opts(fake));
  EXPECT_EQ(kind_of([&] { score_masked(be, "", "x"); }), ErrorKind::UnsupportedMode);
}

TEST(RemoteBackend, StatusMapping) {
  FakeSidecar fake;
  RemoteBackend unknown(opts(fake, "nope"));
  EXPECT_EQ(kind_of([&] { score_causal(unknown, "", "x"); }), ErrorKind::Validation);
  RemoteBackend be(opts(fake));
  EXPECT_EQ(kind_of([&] { score_causal(be, "", "__toolong__"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([&] { score_causal(be, "", "__500__"); }), ErrorKind::Backend);
  EXPECT_EQ(kind_of([&] { score_causal(be, "", "__badcount__"); }), ErrorKind::Backend);
  EXPECT_EQ(kind_of([&] { score_causal(be, "", "__positive__"); }), ErrorKind::Backend);
}

TEST(RemoteBackend, ServerErrorMessageIsSurfaced) {
  FakeSidecar fake;
  RemoteBackend be(opts(fake));
  try {
    score_causal(be, "", "__500__");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("internal failure"), std::string::npos);
  }
}

TEST(RemoteBackend, UnreachableIsUnavailableWithRetryHint) {
  int port = 0;
  {
    FakeSidecar fake;  // grab a free port, then close it
    port = std::stoi(fake.url().substr(fake.url().rfind(':') + 1));
  }
  RemoteOptions o;
  o.base_url = "http://127.0.0.1:" + std::to_string(port);
  o.model = "m";
  o.max_attempts = 2;
  o.backoff = std::chrono::milliseconds(10);
  o.connect_timeout = std::chrono::milliseconds(200);
  RemoteBackend be(o);
  try {
    score_causal(be, "", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BackendUnavailable);
    ASSERT_TRUE(e.retry_after().has_value());
    EXPECT_GT(e.retry_after()->count(), 0);
    EXPECT_EQ(exit_code(e.kind()), 4);
  }
}

TEST(RemoteBackend, LoadingServerIsRetriedThenSucceeds) {
  FakeSidecar fake;
  fake.set_loading(true);
  RemoteOptions o = opts(fake);
  RemoteBackend be(o);
  EXPECT_FALSE(be.healthy());
  fake.set_loading(false);
  EXPECT_TRUE(be.healthy());
}

TEST(RemoteBackend, InFlightRequestsAreBounded) {
  FakeSidecar fake;
  fake.set_delay_ms(30);
  RemoteOptions o = opts(fake);
  o.max_in_flight = 2;
  RemoteBackend be(o);
  std::vector<std::future<void>> futs;
  for (int i = 0; i < 8; ++i) {
    futs.push_back(std::async(std::launch::async, [&] { score_causal(be, "", "a b"); }));
  }
  for (auto& f : futs) f.get();
  EXPECT_EQ(fake.requests(), 8);
  EXPECT_LE(fake.max_in_flight(), 2);
}

TEST(RemoteBackend, ListModels) {
  FakeSidecar fake;
  RemoteBackend be(opts(fake));
  const auto models = be.list_models();
  ASSERT_EQ(models.size(), 2u);
  EXPECT_EQ(models[0].id, "fake-causal");
  EXPECT_EQ(models[0].modes, std::vector<ScoringMode>{ScoringMode::Causal});
  EXPECT_EQ(models[1].modes.size(), 2u);
  EXPECT_EQ(models[1].context_window, 64u);
}

TEST(RemoteBackend, DatasetScoringRoutesPerRecordFailures) {
  FakeSidecar fake;
  RemoteBackend be(opts(fake));
  const auto ds = pplcheck::testing::dataset_from_jsonl(
      R"({"id":"a","claim":"one two","evidence":"e","label":"SUPPORTED"})" "\n"
      R"({"id":"b","claim":"__500__","evidence":"e","label":"UNSUPPORTED"})" "\n"
      R"({"id":"c","claim":"three","evidence":"","label":"UNSUPPORTED"})" "\n");
  const auto run = score_dataset(be, ds, ScoringMode::Causal, true, {.fail_fast = false, .jobs = 3});
  ASSERT_EQ(run.scores.size(), 2u);
  EXPECT_EQ(run.scores[0].id, "a");
  EXPECT_EQ(run.scores[1].id, "c");
  EXPECT_TRUE(run.scores[1].evidence_missing);
  ASSERT_EQ(run.failures.size(), 1u);
  EXPECT_EQ(run.failures[0].id, "b");
  EXPECT_EQ(run.failures[0].kind, ErrorKind::Backend);
}
