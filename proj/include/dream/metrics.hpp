#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

namespace dream {

struct ClassReport {
  std::string name;
  std::size_t support = 0;  // n_i
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f_score = 0.0, auc = 0.0;
};

struct EvalReport {
  double accuracy_top1 = 0.0;
  double accuracy_eq15 = 0.0;  // weighted one-vs-rest form; exceeds top-1
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  double auc = 0.0;
  std::vector<ClassReport> per_class;
  std::size_t n_samples = 0;

  std::string to_json() const;
};

/// Support-weighted multiclass evaluation. Predicted class = row argmax
/// (ties -> lowest index); per-class one-vs-rest confusion counts; AUC by
/// trapezoidal ROC integration on each class's probability column.
EvalReport evaluate(const Eigen::MatrixXd& probs,
                    const std::vector<std::size_t>& labels,
                    const std::vector<std::string>& alphabet);

/// One-vs-rest ROC AUC for a single score column, trapezoidal rule.
double roc_auc(const std::vector<double>& scores,
               const std::vector<bool>& positive);

struct SignTestResult {
  double p_value = 1.0;
  double adjusted_alpha = 0.0;  // Dunn-Sidak: 1 - (1-alpha)^(1/n)
  bool significant = false;
};

/// Two-sided binomial sign test over wins (ties already dropped).
SignTestResult sign_test(unsigned wins_a, unsigned wins_b,
                         unsigned n_datasets, double alpha = 0.05);

}  // namespace dream
