// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "pplcheck_cli.hpp"
#include "test_support.hpp"

using namespace pplcheck;
namespace t = pplcheck::testing;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

struct Criterion {
  const char* id;
  const char* title;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> body;
};

constexpr Label S = Label::Supported;
constexpr Label U = Label::Unsupported;

NgramModel model_from(const std::string& text, int order, double alpha, std::vector<std::string> vocab = {}) {
  std::istringstream in(text);
  return train_ngram(in, order, alpha, vocab);
}

ClaimRecord record(std::string id, std::string claim, std::string evidence, Label label) {
  return {std::move(id), std::move(claim), std::move(evidence), label, std::nullopt};
}

Outcome p1_perplexity() {
  Outcome o;
  for (double v : {2.0, 4.0, 100.0}) {
    t::UniformBackend be(v);
    for (const char* claim : {"a", "a b c", "a b c d e f g h"}) {
      const auto s = score_claim(be, record("r", claim, "ctx", S), ScoringMode::Causal, true);
      o.check(std::abs(s.perplexity - v) <= 1e-9, "uniform |V|=" + std::to_string(v));
    }
  }
  // uniform via a real n-gram model over a declared vocabulary
  for (std::size_t v : {2u, 4u, 100u}) {
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i + 1 < v; ++i) vocab.push_back("w" + std::to_string(i));
    auto m = std::make_shared<const NgramModel>(model_from("", 2, 1.0, vocab));
    NgramBackend be(m);
    const auto s = score_claim(be, record("r", "w0 w0 zz", "w0", S), ScoringMode::Causal, true);
    o.check(m->vocab_size() == v && std::abs(s.perplexity - static_cast<double>(v)) <= 1e-9,
            "empty-corpus n-gram |V|=" + std::to_string(v));
  }
  NgramBackend bigram(std::make_shared<const NgramModel>(model_from("a b a b", 2, 1.0)));
  const auto b = score_claim(bigram, record("r", "b", "a", S), ScoringMode::Causal, true);
  o.check(std::abs(b.perplexity - 1.0 / 0.6) <= 1e-9, "bigram p(b|a)=0.6");
  NgramBackend unigram(std::make_shared<const NgramModel>(model_from("a b a b", 1, 1.0)));
  const auto u = score_claim(unigram, record("r", "a", "", S), ScoringMode::Causal, false);
  o.check(std::abs(u.perplexity - 7.0 / 3.0) <= 1e-9, "unigram p(a)=3/7");
  const std::vector<double> lp = {std::log(0.5), std::log(0.125)};
  o.check(std::abs(perplexity_from_logprobs(lp) - 4.0) <= 1e-9, "mixed log-probs");
  return o;
}

Outcome p2_threshold_oracle() {
  Outcome o;
  SplitMix64 rng(1234);
  std::size_t sets = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    const auto n = 1 + rng.next() % 50;
    const bool coarse = rng.next() % 2;
    std::vector<std::pair<double, Label>> v;
    std::vector<ScoredClaim> shots;
    for (std::size_t i = 0; i < n; ++i) {
      const double ppl = coarse ? 1.0 + static_cast<double>(rng.next() % 15) * 10.0 : 1.0 + rng.next_double() * 2000.0;
      const Label l = rng.next() % 2 ? S : U;
      v.emplace_back(ppl, l);
      shots.push_back(t::make_scored("s" + std::to_string(i), ppl, l));
    }
    for (auto obj : {Objective::F1Macro, Objective::Accuracy}) {
      const auto clf = fit_threshold(shots, obj);
      const double oracle = t::oracle_best_objective(v, obj);
      o.check(clf.fit_report.objective_value + 1e-12 >= oracle, "exact below brute force, trial " + std::to_string(trial));
      o.check(std::abs(t::oracle_objective(v, clf.th, obj) - oracle) <= 1e-12,
              "exact differs from brute force, trial " + std::to_string(trial));
    }
    ++sets;
  }
  o.check(sets >= 1000, "fewer than 1000 shot sets");
  o.detail = o.ok ? std::to_string(sets) + " shot sets" : o.detail;
  return o;
}

Outcome p3_metrics() {
  Outcome o;
  Confusion c;
  c.at(U, U) = 50;
  c.at(U, S) = 10;
  c.at(S, U) = 20;
  c.at(S, S) = 20;
  const auto r = evaluate(c);
  o.check(std::abs(r.accuracy - 0.70) <= 1e-12, "accuracy");
  o.check(std::abs(r.f1_macro - 0.6703) <= 5e-4, "f1_macro");
  Confusion z;
  z.at(S, U) = 5;
  const auto zr = evaluate(z);
  o.check(zr.accuracy == 0.0 && zr.supported.f1 == 0.0 && zr.unsupported.f1 == 0.0 && zr.f1_macro == 0.0 &&
              zr.unsupported.precision == 0.0,
          "zero-division rule");
  Confusion perfect;
  perfect.at(S, S) = 3;
  perfect.at(U, U) = 1;
  const auto pr = evaluate(perfect);
  o.check(pr.accuracy == 1.0 && pr.f1_macro == 1.0, "perfect predictions");
  o.detail = o.ok ? "acc=" + std::to_string(r.accuracy) + " f1_macro=" + std::to_string(r.f1_macro) : o.detail;
  return o;
}

Outcome p4_separation() {
  Outcome o;
  const auto fx = t::make_separable_fixture(200);
  NgramBackend be(std::make_shared<const NgramModel>(train_ngram(fx.corpus, 2, 0.1)));
  ExperimentConfig cfg;
  cfg.shots = 10;
  cfg.seeds = kDefaultSeeds;
  const auto rep = run_experiment(fx.dataset, be, ScoringMode::Causal, true, cfg);
  o.check(rep.per_seed.size() == 3, "three seeds");
  o.check(rep.f1_macro.mean >= 0.9, "mean f1_macro " + std::to_string(rep.f1_macro.mean) + " < 0.9");
  if (o.ok) o.detail = "mean f1_macro=" + std::to_string(rep.f1_macro.mean);
  return o;
}

Outcome p5_ablation_locality() {
  Outcome o;
  const auto fx = t::make_separable_fixture(200);
  NgramBackend uni(std::make_shared<const NgramModel>(train_ngram(fx.corpus, 1, 0.1)));
  NgramBackend tri(std::make_shared<const NgramModel>(train_ngram(fx.corpus, 3, 0.1)));
  std::size_t differing = 0;
  for (const auto& rec : fx.dataset.records()) {
    const auto c1 = score_claim(uni, rec, ScoringMode::Causal, true);
    const auto u1 = score_claim(uni, rec, ScoringMode::Causal, false);
    o.check(c1.token_logprobs.logprobs() == u1.token_logprobs.logprobs() && c1.perplexity == u1.perplexity,
            "order-1 differs for " + rec.id);
    const auto c3 = score_claim(tri, rec, ScoringMode::Causal, true).token_logprobs.logprobs();
    const auto u3 = score_claim(tri, rec, ScoringMode::Causal, false).token_logprobs.logprobs();
    o.check(c3.size() == u3.size(), "token count differs for " + rec.id);
    for (std::size_t i = 2; i < c3.size(); ++i) o.check(c3[i] == u3[i], "order-3 differs past token 2 for " + rec.id);
    differing += c3 != u3;
  }
  o.check(differing > 0, "evidence never changed an order-3 score");
  if (o.ok) o.detail = std::to_string(differing) + " records differ in the first two tokens";
  return o;
}

Outcome p6_ranking() {
  Outcome o;
  SplitMix64 rng(66);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = 1 + rng.next() % 40;
    std::vector<ScoredClaim> s;
    std::vector<std::pair<double, Label>> items;
    std::vector<std::string> ids;
    std::vector<std::size_t> ks;
    for (std::size_t i = 0; i < n; ++i) {
      const double ppl = 1.0 + static_cast<double>(rng.next() % 25);
      const Label l = rng.next() % 2 ? S : U;
      ids.push_back("c" + std::to_string(rng.next() % 500) + "-" + std::to_string(i));
      s.push_back(t::make_scored(ids.back(), ppl, l));
      items.emplace_back(ppl, l);
      ks.push_back(i + 1);
    }
    const auto rep = rank_claims(s, ks);
    const auto oracle = t::oracle_precision_at_k(items, ids);
    for (std::size_t k = 0; k < n; ++k) {
      o.check(std::abs(rep.precision_at_k[k] - oracle[k]) <= 1e-12, "P@k mismatch, trial " + std::to_string(trial));
    }
  }
  std::vector<ScoredClaim> s;
  for (int i = 0; i < 120; ++i) s.push_back(t::make_scored("r" + std::to_string(i), 1.0 + i, i % 4 == 0 ? U : S));
  const std::vector<std::size_t> ks = {1, 10, 60, 120};
  const auto rep = rank_claims(s, ks, 10000, 11);
  double worst = 0.0;
  for (double p : rep.baseline_precision_at_k) worst = std::max(worst, std::abs(p - 0.25));
  o.check(worst <= 0.02, "baseline deviates from prior by " + std::to_string(worst));
  if (o.ok) o.detail = "baseline max deviation " + std::to_string(worst);
  return o;
}

Outcome p7_negation() {
  Outcome o;
  const auto ex = negate_claim("5g helps covid-19 spread.");
  o.check(ex.text == "5g does not help covid-19 spread.", "example gave '" + ex.text + "'");
  std::size_t cases = 0;
  for (auto aux : kPositiveAuxiliaries) {
    for (const std::string tmpl : {"The treatment {} work.", "{} masks reduce the spread?"}) {
      std::string s = tmpl;
      std::string word(aux);
      if (s.starts_with("{}")) word[0] = ascii_upper(word[0]);
      s.replace(s.find("{}"), 2, word);
      const ClaimRecord rec = record("r", s, "ev", cases % 2 ? S : U);
      const auto once = negate_record(rec);
      ClaimRecord neg = rec;
      neg.claim = once.negated_claim;
      neg.label = once.negated_label;
      const auto twice = negate_record(neg);
      o.check(once.negated_claim != s, "no change for '" + s + "'");
      o.check(once.negated_label == flip(rec.label), "label not flipped for '" + s + "'");
      o.check(twice.negated_claim == s && twice.negated_label == rec.label, "involution fails for '" + s + "'");
      ++cases;
    }
  }
  const auto ds = t::dataset_from_jsonl(
      R"({"id":"x","claim":"5g helps covid-19 spread.","evidence":"e","label":"UNSUPPORTED"})" "\n");
  const auto aug = negate_dataset(ds);
  o.check(aug.dataset.size() == 2 && aug.dataset[1].label == S && aug.dataset[1].evidence == "e",
          "augmented record");
  if (o.ok) o.detail = std::to_string(cases) + " auxiliary round trips";
  return o;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pplcheck");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return pplcheck::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome p8_determinism() {
  Outcome o;
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  t::TempDir dir;
  const auto fx = t::make_separable_fixture(120);
  std::string corpus;
  for (const auto& s : fx.corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) corpus += (i ? " " : "") + s[i];
    corpus += '\n';
  }
  t::write_file(dir / "corpus.txt", corpus);
  save_dataset(dir / "ds.jsonl", fx.dataset);
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  o.check(run_cli({"ngram-train", "--corpus", p("corpus.txt"), "--order", "3", "--out", p("m.json")}) == 0, "train");
  std::vector<std::string> outputs;
  for (const std::string tag : {"a", "b"}) {
    o.check(run_cli({"score", "--dataset", p("ds.jsonl"), "--backend", "ngram:" + p("m.json"), "--jobs", "4", "--out",
                     p("scores_" + tag + ".jsonl")}) == 0,
            "score");
    o.check(run_cli({"run", "--dataset", p("ds.jsonl"), "--scores", p("scores_" + tag + ".jsonl"), "--shots", "10",
                     "--seeds", "13,42,2020", "--out", p("run_" + tag + ".json"), "--csv", p("run_" + tag + ".csv")}) == 0,
            "run");
    outputs.push_back(t::read_file(p("scores_" + tag + ".jsonl")) + '\x1e' + t::read_file(p("run_" + tag + ".json")) +
                      '\x1e' + t::read_file(p("run_" + tag + ".csv")));
  }
  o.check(outputs[0].size() > 100 && outputs[0] == outputs[1], "outputs differ between runs");
  ::unsetenv("SOURCE_DATE_EPOCH");
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"P1", "perplexity correctness", 1.0, p1_perplexity},
      {"P2", "threshold oracle equivalence", 30.0, p2_threshold_oracle},
      {"P3", "metric correctness", 0.0, p3_metrics},
      {"P4", "end-to-end separation", 10.0, p4_separation},
      {"P5", "ablation locality", 0.0, p5_ablation_locality},
      {"P6", "ranking", 0.0, p6_ranking},
      {"P7", "negation", 0.0, p7_negation},
      {"P8", "determinism", 0.0, p8_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.ok = false;
      o.detail = "runtime " + std::to_string(secs) + " s exceeds " + std::to_string(c.budget_s) + " s";
    }
    std::printf("%s %s - %s (%.3f s)%s%s\n", o.ok ? "PASS" : "FAIL", c.id, c.title, secs,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    failed += !o.ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
