#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dream/decay.hpp"
#include "dream/event_log.hpp"
#include "dream/metrics.hpp"
#include "dream/neural.hpp"
#include "dream/replay.hpp"

namespace dream {

enum class ArchitectureKind { Nap, Napr };

struct RunConfig {
  std::string log_path;
  std::vector<std::string> model_paths;  // PNML candidates
  std::string output_dir;
  std::size_t k_folds = 10;
  std::uint64_t seed = 1;
  double beta = 1.0;
  ArchitectureKind architecture = ArchitectureKind::Nap;
  Activation napr_activation = Activation::Relu;
  CsvMapping csv_mapping;  // used when the log is CSV
  double discretization_width = 20.0;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> max_epochs;
  std::optional<double> learning_rate;
  ReplayPolicy replay_policy;
  /// Ablation: zero the decay-response block of every sample.
  bool zero_decay_block = false;
  /// Optional attribute-equality pre-filter (e.g. lifecycle == complete).
  std::optional<std::pair<std::string, std::string>> attribute_filter;
};

/// Per-feature mean/std computed on the training portion. Block boundaries
/// (F, C, M, R) are kept so components can be inspected separately.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::size_t f_width = 0, c_width = 0, m_width = 0, r_width = 0;
};

/// Left-closed bins of fixed width: value -> "[k*w,(k+1)*w)".
std::string discretize_value(double value, double width);
std::vector<std::string> discretize(const std::vector<double>& values,
                                    double width);

/// stats unset: compute per-feature mean/std on `x` and transform in place
/// (sigma = 0 columns map to 0). stats set: apply them (test-set path).
NormStats normalize(Matrix& x, const std::optional<NormStats>& stats,
                    std::size_t f_width, std::size_t c_width,
                    std::size_t m_width, std::size_t r_width);

struct SampleMatrices {
  Matrix x;
  std::vector<std::size_t> y;  // label indices into alphabet
  std::vector<std::string> alphabet;
};

/// Converts a SampleSet to matrices. NAP uses the first 3*|P| feature
/// columns (F,C,M); NAPr appends the R block as well.
SampleMatrices to_matrices(const SampleSet& set, ArchitectureKind arch,
                           const std::vector<std::string>& alphabet);

struct FoldOutcome {
  std::size_t fold = 0;
  bool completed = false;
  std::string error;
  std::size_t chosen_model = 0;
  double chosen_fitness = 0.0;
  EvalReport report;
  std::vector<EpochRecord> history;
};

struct ExperimentSummary {
  std::vector<FoldOutcome> folds;
  std::map<std::string, double> mean_metrics;
  std::map<std::string, double> std_metrics;

  std::string to_json() const;
};

/// Full cross-validation protocol: per fold, pick the best-fitness PNML
/// candidate on the training traces, estimate decay rates, build samples,
/// split train/validation by trace, normalize with training stats, train,
/// and evaluate on the test traces.
ExperimentSummary run_experiment(const RunConfig& cfg,
                                 const EventLog& log,
                                 const std::vector<PetriNet>& candidates);

/// Convenience wrapper that loads the log and models from cfg paths and
/// writes summary JSON / per-fold CSV / epoch histories into output_dir.
ExperimentSummary run_experiment_files(const RunConfig& cfg);

}  // namespace dream
