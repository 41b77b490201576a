#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "maint/evaluation.hpp"

using namespace maint;

namespace {

// naive re-ranking oracle: stable sort by score descending, target loses ties
std::size_t naive_rank(const std::vector<double>& scores) {
  std::vector<std::pair<double, bool>> rows;  // (score, is_target)
  rows.emplace_back(scores[0], true);
  for (std::size_t i = 1; i < scores.size(); ++i) rows.emplace_back(scores[i], false);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return !a.second && b.second;  // equal scores: non-target ranks ahead
  });
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].second) return i + 1;
  return rows.size();
}

DatasetSplit toy_split(std::size_t n_users, std::size_t n_negatives = 100) {
  DatasetSplit split;
  for (std::size_t u = 0; u < n_users; ++u) {
    UserSequence seq;
    seq.user = u;
    seq.events.push_back({1, 1, 1, kTerminalBucket, 0});
    seq.target_positions = {0};
    split.train.push_back(seq);
    split.test.push_back({1, 1, true});
    split.validation.push_back({1, 1, false});
    std::vector<std::size_t> negs;
    for (std::size_t n = 0; n < n_negatives; ++n) negs.push_back(2 + n);
    split.negatives.push_back(negs);
  }
  return split;
}

}  // namespace

TEST_CASE("rank_from_scores") {
  CHECK(rank_from_scores({0.9, 0.1, 0.5}) == 1);
  std::vector<double> equal(101, 0.25);
  CHECK(rank_from_scores(equal) == 101);
  // hand fixture: target 0.4 vs {0.7, 0.4, 0.1} -> one higher, one tie
  CHECK(rank_from_scores({0.4, 0.7, 0.4, 0.1}) == 3);
  CHECK_THROWS_AS(rank_from_scores({}), ProtocolError);
}

TEST_CASE("hr and ndcg closed forms") {
  CHECK(hr_at_k(1, 1) == 1.0);
  CHECK(ndcg_at_k(1, 10) == 1.0);
  CHECK(ndcg_at_k(3, 10) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(hr_at_k(11, 10) == 0.0);
  CHECK(ndcg_at_k(11, 10) == 0.0);
  // monotone in K
  for (std::size_t r = 1; r <= 20; ++r)
    for (std::size_t k = 1; k < 20; ++k) {
      CHECK(hr_at_k(r, k) <= hr_at_k(r, k + 1));
      CHECK(ndcg_at_k(r, k) <= ndcg_at_k(r, k + 1));
    }
}

TEST_CASE("ranking agrees with a naive re-sort on 10000 random fixtures") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 9);
  for (int rep = 0; rep < 10000; ++rep) {
    const std::size_t n = 2 + rng() % 100;
    std::vector<double> scores(n);
    const bool with_ties = rep % 3 == 0;
    for (auto& s : scores) s = with_ties ? coarse(rng) / 10.0 : unif(rng);
    CHECK(rank_from_scores(scores) == naive_rank(scores));
  }
}

TEST_CASE("evaluate_scorer: perfect scorer gets all metrics 1") {
  DatasetSplit split = toy_split(50);
  auto perfect = [](std::size_t, const std::vector<std::size_t>& cands) {
    std::vector<double> s(cands.size(), 0.0);
    s[0] = 1.0;
    return s;
  };
  EvalReport r = evaluate_scorer(perfect, split);
  CHECK(r.n_evaluated == 50);
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    CHECK(r.hr[i] == 1.0);
    CHECK(r.ndcg[i] == 1.0);
  }
}

TEST_CASE("evaluate_scorer: constant scorer gets HR@10 = 0 over 101 candidates") {
  DatasetSplit split = toy_split(20);
  auto constant = [](std::size_t, const std::vector<std::size_t>& cands) {
    return std::vector<double>(cands.size(), 0.5);
  };
  EvalReport r = evaluate_scorer(constant, split);
  CHECK(r.hr_at(10) == 0.0);
}

TEST_CASE("evaluate_scorer: uniform-random scorer lands near 10/101") {
  DatasetSplit split = toy_split(2500);
  auto random_scorer = [](std::size_t user, const std::vector<std::size_t>& cands) {
    std::mt19937_64 rng(user * 0x9E3779B97F4A7C15ULL + 7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> s(cands.size());
    for (auto& v : s) v = unif(rng);
    return s;
  };
  EvalReport r = evaluate_scorer(random_scorer, split);
  CHECK(r.n_evaluated == 2500);
  CHECK(std::abs(r.hr_at(10) - 10.0 / 101.0) < 0.02);
  // HR non-decreasing in K, NDCG <= HR
  CHECK(r.hr_at(2) <= r.hr_at(6));
  CHECK(r.hr_at(6) <= r.hr_at(10));
  for (std::size_t i = 0; i < r.ks.size(); ++i) CHECK(r.ndcg[i] <= r.hr[i]);
}

TEST_CASE("evaluate on a model: determinism, exclusion and no mutation") {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.aspects = 2;
  cfg.dropout_rate = 0.2;  // must be ignored at inference
  cfg.n_items = 120;
  cfg.n_categories = 5;
  cfg.n_behaviors = 3;
  Model model(cfg, 5);

  DatasetSplit split;
  std::mt19937_64 rng(6);
  for (std::size_t u = 0; u < 30; ++u) {
    UserSequence seq;
    seq.user = u;
    for (int n = 0; n < 6; ++n)
      seq.events.push_back({1 + rng() % 119, 1 + rng() % 4, n % 2 ? 1u : 2u,
                            rng() % 10, n * 50});
    recompute_target_positions(seq, 1);
    split.train.push_back(seq);
    split.test.push_back({1 + rng() % 119, 1, true});
    split.validation.push_back({1 + rng() % 119, 1, u % 2 == 0});
    std::vector<std::size_t> negs;
    if (u != 3) {  // user 3: no negatives sampled -> excluded
      std::vector<bool> used(120, false);
      used[split.test.back().item] = true;
      used[split.validation.back().item] = true;
      for (const Event& e : seq.events) used[e.item] = true;
      for (std::size_t i = 1; i < 120 && negs.size() < 100; ++i)
        if (!used[i]) negs.push_back(i);
    }
    split.negatives.push_back(negs);
  }

  double checksum_before = 0.0;
  for (Parameter* p : model.parameters())
    for (std::size_t k = 0; k < p->value.size(); ++k)
      checksum_before += p->value[k] * (1.0 + 1e-3 * (k % 97));

  EvalReport a = evaluate(model, split);
  EvalReport b = evaluate(model, split);
  CHECK(a.n_evaluated == 29);
  CHECK(a.n_excluded == 1);
  CHECK(a.ranks == b.ranks);
  CHECK(a.hr == b.hr);
  CHECK(a.ndcg == b.ndcg);

  double checksum_after = 0.0;
  for (Parameter* p : model.parameters())
    for (std::size_t k = 0; k < p->value.size(); ++k)
      checksum_after += p->value[k] * (1.0 + 1e-3 * (k % 97));
  CHECK(checksum_before == checksum_after);

  // validation set: only even users have a target
  EvalReport v = evaluate(model, split, kDefaultKs, EvalSet::validation);
  CHECK(v.n_evaluated == 15);  // even users all have negatives (user 3 is odd)
  CHECK(v.n_excluded == 15);

  // naive oracle on the model scores
  for (std::size_t u = 0; u < 3; ++u) {
    Tape t;
    auto tr = model.forward_full(t, split.train[u]);
    std::vector<double> scores{t.value(tr.item_probs)[split.test[u].item]};
    for (std::size_t n : split.negatives[u])
      scores.push_back(t.value(tr.item_probs)[n]);
    CHECK(a.ranks[u] == naive_rank(scores));  // users 0..2 precede the excluded one
  }
}

TEST_CASE("rank_candidates rejects a test item among the negatives") {
  ModelConfig cfg;
  cfg.d = 4;
  cfg.aspects = 1;
  cfg.n_items = 10;
  cfg.n_categories = 3;
  cfg.n_behaviors = 3;
  Model model(cfg, 1);
  UserSequence seq;
  seq.user = 0;
  seq.events.push_back({2, 1, 1, kTerminalBucket, 0});
  seq.target_positions = {0};
  CHECK_THROWS_AS(rank_candidates(model, seq, 4, {3, 4, 5}), ProtocolError);
}

TEST_CASE("incomplete_beta sanity") {
  for (double x : {0.1, 0.25, 0.5, 0.9})
    CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
  CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-10));
  // I_x(2,3) = x^2(6 - 8x + 3x^2)
  const double x = 0.3;
  CHECK(incomplete_beta(2.0, 3.0, x) ==
        doctest::Approx(x * x * (6 - 8 * x + 3 * x * x)).epsilon(1e-10));
}

TEST_CASE("seed_compare") {
  std::vector<double> a{0.31, 0.31, 0.31};
  CHECK(seed_compare(a, a).p_value == 1.0);
  CHECK_FALSE(seed_compare(a, a).significant);

  std::vector<double> ones{1.0, 1.0 + 1e-9, 1.0 - 1e-9};
  std::vector<double> zeros{0.0, 1e-9, -1e-9};
  TTestResult t = seed_compare(ones, zeros);
  CHECK(t.p_value < 0.001);
  CHECK(t.significant);
  TTestResult t2 = seed_compare(zeros, ones);
  CHECK(t2.p_value == doctest::Approx(t.p_value).epsilon(1e-12));
  CHECK(t2.statistic == doctest::Approx(-t.statistic).epsilon(1e-12));

  // textbook check: t=2.228, dof=10 sits at the two-tailed 5% point
  std::vector<double> c{1.0, 2.0};
  CHECK_THROWS_AS(seed_compare(c, {1.0}), std::invalid_argument);

  // Welch on a hand example: A={10,11,12}, B={8,9,10}
  // means 11 and 9, both variances 1, se = sqrt(2/3), t = 2/sqrt(2/3) = 2.4495
  TTestResult w = seed_compare({10, 11, 12}, {8, 9, 10});
  CHECK(w.statistic == doctest::Approx(2.0 / std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(w.dof == doctest::Approx(4.0).epsilon(1e-12));
  // p for t=2.4495, dof=4: 0.0705 (tables)
  CHECK(w.p_value == doctest::Approx(0.0705).epsilon(2e-3));
}

TEST_CASE("aggregate") {
  SeedAggregate s = aggregate({0.2, 0.4, 0.6});
  CHECK(s.mean == doctest::Approx(0.4));
  CHECK(s.stddev == doctest::Approx(0.2));
  CHECK(aggregate({}).mean == 0.0);
  CHECK(aggregate({1.5}).stddev == 0.0);
}

TEST_CASE("report formatting") {
  DatasetSplit split = toy_split(4);
  auto perfect = [](std::size_t, const std::vector<std::size_t>& cands) {
    std::vector<double> s(cands.size(), 0.0);
    s[0] = 1.0;
    return s;
  };
  EvalReport r = evaluate_scorer(perfect, split);
  std::string text = format_report(r);
  CHECK(text.find("users_evaluated: 4") != std::string::npos);
  CHECK(text.find("K: 10") != std::string::npos);
  std::string csv = report_csv(r, 7);
  CHECK(csv.find("metric,K,seed,value") != std::string::npos);
  CHECK(csv.find("HR,10,7,1") != std::string::npos);
}
