#include "maint/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace maint {

std::size_t rank_from_scores(const std::vector<double>& candidate_scores) {
  if (candidate_scores.empty())
    throw ProtocolError("rank_from_scores: empty candidate list");
  const double target = candidate_scores[0];
  std::size_t rank = 1;
  for (std::size_t i = 1; i < candidate_scores.size(); ++i)
    if (candidate_scores[i] >= target) ++rank;
  return rank;
}

std::size_t rank_candidates(Model& model, const UserSequence& seq,
                            std::size_t test_item,
                            const std::vector<std::size_t>& negatives) {
  for (std::size_t n : negatives)
    if (n == test_item)
      throw ProtocolError("rank_candidates: test item " + std::to_string(test_item) +
                          " appears among the negatives");
  Tape tape;
  ForwardTrace trace = model.forward_full(tape, seq);
  const Tensor& probs = tape.value(trace.item_probs);
  std::vector<double> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(probs[test_item]);
  for (std::size_t n : negatives) scores.push_back(probs[n]);
  return rank_from_scores(scores);
}

double hr_at_k(std::size_t rank, std::size_t k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(std::size_t rank, std::size_t k) {
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double EvalReport::hr_at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return hr[i];
  throw std::out_of_range("EvalReport: K=" + std::to_string(k) + " not evaluated");
}

double EvalReport::ndcg_at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return ndcg[i];
  throw std::out_of_range("EvalReport: K=" + std::to_string(k) + " not evaluated");
}

namespace {

EvalReport reduce_ranks(std::vector<std::size_t> ranks, std::size_t excluded,
                        const std::vector<std::size_t>& ks) {
  EvalReport report;
  report.ks = ks;
  report.ranks = std::move(ranks);
  report.n_evaluated = report.ranks.size();
  report.n_excluded = excluded;
  for (std::size_t k : ks) {
    double h = 0.0, n = 0.0;
    for (std::size_t r : report.ranks) {
      h += hr_at_k(r, k);
      n += ndcg_at_k(r, k);
    }
    const double denom = report.n_evaluated ? static_cast<double>(report.n_evaluated) : 1.0;
    report.hr.push_back(h / denom);
    report.ndcg.push_back(n / denom);
  }
  return report;
}

const EvalTarget& target_of(const DatasetSplit& split, EvalSet set, std::size_t u) {
  return set == EvalSet::test ? split.test[u] : split.validation[u];
}

}  // namespace

EvalReport evaluate(Model& model, const DatasetSplit& split,
                    const std::vector<std::size_t>& ks, EvalSet set) {
  const std::size_t n_users = split.train.size();
  std::vector<long long> rank_of(n_users, -1);
  std::size_t excluded = 0;
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!target_of(split, set, u).present || split.negatives[u].empty()) {
      rank_of[u] = 0;  // sentinel: skip
      ++excluded;
      continue;
    }
    // validated serially: a throw inside the parallel region would terminate
    for (std::size_t n : split.negatives[u])
      if (n == target_of(split, set, u).item)
        throw ProtocolError("evaluate: target item " + std::to_string(n) +
                            " of user index " + std::to_string(u) +
                            " appears among the negatives");
  }
#pragma omp parallel for schedule(dynamic)
  for (std::size_t u = 0; u < n_users; ++u) {
    if (rank_of[u] == 0) continue;
    const EvalTarget& t = target_of(split, set, u);
    rank_of[u] = static_cast<long long>(
        rank_candidates(model, split.train[u], t.item, split.negatives[u]));
  }
  std::vector<std::size_t> ranks;
  ranks.reserve(n_users - excluded);
  for (std::size_t u = 0; u < n_users; ++u)
    if (rank_of[u] > 0) ranks.push_back(static_cast<std::size_t>(rank_of[u]));
  return reduce_ranks(std::move(ranks), excluded, ks);
}

EvalReport evaluate_scorer(const CandidateScorer& scorer, const DatasetSplit& split,
                           const std::vector<std::size_t>& ks, EvalSet set) {
  std::vector<std::size_t> ranks;
  std::size_t excluded = 0;
  for (std::size_t u = 0; u < split.train.size(); ++u) {
    const EvalTarget& t = target_of(split, set, u);
    if (!t.present || split.negatives[u].empty()) {
      ++excluded;
      continue;
    }
    std::vector<std::size_t> candidates{t.item};
    candidates.insert(candidates.end(), split.negatives[u].begin(),
                      split.negatives[u].end());
    ranks.push_back(rank_from_scores(scorer(u, candidates)));
  }
  return reduce_ranks(std::move(ranks), excluded, ks);
}

// Continued-fraction evaluation of the regularized incomplete beta function
// (Lentz's method).
double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // use the fast-converging tail; complement at the end rather than recursing
  const bool swap = x >= (a + 1.0) / (a + b + 2.0);
  if (swap) {
    std::swap(a, b);
    x = 1.0 - x;
  }
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double tiny = 1e-300;
  double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 300; ++m) {
    const double dm = static_cast<double>(m);
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= d * c;
    num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-14) break;
  }
  const double result = std::exp(ln_front) * f / a;
  return swap ? 1.0 - result : result;
}

namespace {

double student_t_two_tailed(double t, double dof) {
  const double x = dof / (dof + t * t);
  return incomplete_beta(dof / 2.0, 0.5, x);
}

}  // namespace

TTestResult seed_compare(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("seed_compare: both lists need at least 2 values");
  const SeedAggregate sa = aggregate(a), sb = aggregate(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = sa.stddev * sa.stddev, vb = sb.stddev * sb.stddev;
  const double se2 = va / na + vb / nb;
  TTestResult out;
  if (se2 == 0.0) {
    // degenerate zero-variance samples: identical means are indistinguishable
    out.statistic = (sa.mean == sb.mean) ? 0.0
                    : (sa.mean > sb.mean ? 1.0 : -1.0) / 0.0;  // +-inf
    out.dof = na + nb - 2.0;
    out.p_value = (sa.mean == sb.mean) ? 1.0 : 0.0;
  } else {
    out.statistic = (sa.mean - sb.mean) / std::sqrt(se2);
    out.dof = se2 * se2 /
              (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    out.p_value = student_t_two_tailed(out.statistic, out.dof);
  }
  out.significant = out.p_value < 0.05;
  return out;
}

SeedAggregate aggregate(const std::vector<double>& values) {
  SeedAggregate out;
  out.values = values;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  os << "users_evaluated: " << report.n_evaluated << "\n";
  os << "users_excluded: " << report.n_excluded << "\n";
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    os << "K: " << report.ks[i] << "\n";
    os << "  HR: " << report.hr[i] << "\n";
    os << "  NDCG: " << report.ndcg[i] << "\n";
  }
  return os.str();
}

std::string report_csv(const EvalReport& report, std::uint64_t seed) {
  std::ostringstream os;
  os << "metric,K,seed,value\n";
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    os << "HR," << report.ks[i] << "," << seed << "," << report.hr[i] << "\n";
    os << "NDCG," << report.ks[i] << "," << seed << "," << report.ndcg[i] << "\n";
  }
  return os.str();
}

}  // namespace maint
