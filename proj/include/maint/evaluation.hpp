#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "maint/data.hpp"
#include "maint/model.hpp"

namespace maint {

// Which aligned target column of a DatasetSplit to rank.
enum class EvalSet { test, validation };

// Scores for {target} ∪ negatives, target first. Rank is 1 + the number of
// other candidates scoring >= the target (ties count against the target).
std::size_t rank_from_scores(const std::vector<double>& candidate_scores);

// Full-history forward pass, then candidate restriction of y^I.
// Throws ProtocolError when the test item appears among the negatives.
std::size_t rank_candidates(Model& model, const UserSequence& seq,
                            std::size_t test_item,
                            const std::vector<std::size_t>& negatives);

double hr_at_k(std::size_t rank, std::size_t k);
double ndcg_at_k(std::size_t rank, std::size_t k);

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<double> hr;      // aligned with ks
  std::vector<double> ndcg;    // aligned with ks
  std::size_t n_evaluated = 0;
  std::size_t n_excluded = 0;  // users without a target or without negatives
  std::vector<std::size_t> ranks;  // per evaluated user, in user order

  double hr_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
};

inline const std::vector<std::size_t> kDefaultKs{2, 6, 10};

// Per-user evaluation is parallel over a read-only model; ranks are reduced
// in user order, so results are deterministic.
EvalReport evaluate(Model& model, const DatasetSplit& split,
                    const std::vector<std::size_t>& ks = kDefaultKs,
                    EvalSet set = EvalSet::test);

// Same protocol with an arbitrary scorer: candidates (target first) -> scores.
using CandidateScorer = std::function<std::vector<double>(
    std::size_t user_index, const std::vector<std::size_t>& candidates)>;

EvalReport evaluate_scorer(const CandidateScorer& scorer, const DatasetSplit& split,
                           const std::vector<std::size_t>& ks = kDefaultKs,
                           EvalSet set = EvalSet::test);

struct TTestResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool significant = false;  // p < 0.05
};

// Welch's two-tailed unpaired t-test. Both lists need >= 2 values.
// Zero variance in both lists with equal means gives p = 1.
TTestResult seed_compare(const std::vector<double>& a, const std::vector<double>& b);

struct SeedAggregate {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

SeedAggregate aggregate(const std::vector<double>& values);

// Regularized incomplete beta function I_x(a, b), exposed for testing.
double incomplete_beta(double a, double b, double x);

// key:value text blocks, one per K.
std::string format_report(const EvalReport& report);
// CSV rows: metric,K,seed,value.
std::string report_csv(const EvalReport& report, std::uint64_t seed);

}  // namespace maint
