#include "dream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "dream/event_log.hpp"  // ValidationError

namespace dream {

double roc_auc(const std::vector<double>& scores,
               const std::vector<bool>& positive) {
  std::size_t pos = 0, neg = 0;
  for (bool p : positive) (p ? pos : neg)++;
  if (pos == 0 || neg == 0) return 0.5;  // degenerate: no curve

  // Descending score; thresholds at every distinct value; (0,0) and (1,1)
  // anchors; trapezoidal rule. Ties are grouped so tied scores form one
  // diagonal segment.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double auc = 0.0;
  double prev_tpr = 0.0, prev_fpr = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (positive[order[i]]) ++tp;
      else ++fp;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / pos;
    const double fpr = static_cast<double>(fp) / neg;
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  auc += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
  return auc;
}

EvalReport evaluate(const Eigen::MatrixXd& probs,
                    const std::vector<std::size_t>& labels,
                    const std::vector<std::string>& alphabet) {
  if (probs.rows() == 0) throw ValidationError("evaluate: empty input");
  if (static_cast<std::size_t>(probs.rows()) != labels.size())
    throw ValidationError("evaluate: rows/labels size mismatch");
  if (static_cast<std::size_t>(probs.cols()) != alphabet.size())
    throw ValidationError("evaluate: columns/alphabet size mismatch");

  const std::size_t n = labels.size();
  const std::size_t k = alphabet.size();
  std::vector<std::size_t> predicted(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] >= k) throw ValidationError("evaluate: label out of range");
    Eigen::Index best = 0;
    probs.row(static_cast<Eigen::Index>(r)).maxCoeff(&best);
    predicted[r] = static_cast<std::size_t>(best);
  }

  EvalReport report;
  report.n_samples = n;
  report.per_class.resize(k);

  std::size_t correct = 0;
  for (std::size_t r = 0; r < n; ++r)
    if (predicted[r] == labels[r]) ++correct;
  report.accuracy_top1 = static_cast<double>(correct) / n;

  for (std::size_t c = 0; c < k; ++c) {
    ClassReport& cls = report.per_class[c];
    cls.name = alphabet[c];
    std::vector<double> scores(n);
    std::vector<bool> positive(n);
    for (std::size_t r = 0; r < n; ++r) {
      const bool truth = labels[r] == c;
      const bool pred = predicted[r] == c;
      if (truth) ++cls.support;
      if (truth && pred) ++cls.tp;
      else if (!truth && pred) ++cls.fp;
      else if (truth && !pred) ++cls.fn;
      else ++cls.tn;
      scores[r] = probs(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(c));
      positive[r] = truth;
    }
    const auto ratio = [](long long num, long long den) {
      return den > 0 ? static_cast<double>(num) / den : 0.0;
    };
    cls.precision = ratio(cls.tp, cls.tp + cls.fp);
    cls.recall = ratio(cls.tp, cls.tp + cls.fn);
    cls.f_score = (cls.precision + cls.recall) > 0.0
                      ? 2.0 * cls.precision * cls.recall /
                            (cls.precision + cls.recall)
                      : 0.0;
    cls.auc = cls.support > 0 ? roc_auc(scores, positive) : 0.0;

    const double weight = static_cast<double>(cls.support) / n;
    report.accuracy_eq15 +=
        weight * ratio(cls.tp + cls.tn, cls.tp + cls.tn + cls.fp + cls.fn);
    report.precision += weight * cls.precision;
    report.recall += weight * cls.recall;
    report.f_score += weight * cls.f_score;
    report.auc += weight * cls.auc;
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_samples"] = n_samples;
  j["accuracy_top1"] = accuracy_top1;
  j["accuracy_eq15"] = accuracy_eq15;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f_score"] = f_score;
  j["auc"] = auc;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : per_class) {
    j["per_class"].push_back({{"name", c.name},
                              {"support", c.support},
                              {"tp", c.tp},
                              {"fp", c.fp},
                              {"fn", c.fn},
                              {"tn", c.tn},
                              {"precision", c.precision},
                              {"recall", c.recall},
                              {"f_score", c.f_score},
                              {"auc", c.auc}});
  }
  return j.dump(2);
}

SignTestResult sign_test(unsigned wins_a, unsigned wins_b,
                         unsigned n_datasets, double alpha) {
  if (n_datasets == 0) throw ValidationError("sign_test: zero datasets");
  if (wins_a + wins_b > n_datasets)
    throw ValidationError("sign_test: wins exceed dataset count");

  SignTestResult result;
  result.adjusted_alpha = 1.0 - std::pow(1.0 - alpha, 1.0 / n_datasets);

  // Two-sided exact binomial test at p = 1/2 over non-tied datasets.
  const unsigned n = wins_a + wins_b;
  if (n == 0) {
    result.p_value = 1.0;
    result.significant = false;
    return result;
  }
  // Mid-p correction: the boundary outcome contributes half its mass, which
  // removes the conservatism of the plain exact test on small n.
  const unsigned k = std::max(wins_a, wins_b);
  double tail = 0.0;
  for (unsigned i = k; i <= n; ++i) {
    // log C(n, i) via lgamma for numerical safety
    const double log_c = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                         std::lgamma(n - i + 1.0);
    const double mass = std::exp(log_c - n * std::log(2.0));
    tail += (i == k) ? 0.5 * mass : mass;
  }
  result.p_value = std::min(1.0, 2.0 * tail);
  result.significant = result.p_value < result.adjusted_alpha;
  return result;
}

}  // namespace dream
