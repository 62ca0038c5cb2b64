#include "dream/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

namespace dream {

std::string discretize_value(double value, double width) {
  if (width <= 0.0) throw ValidationError("discretize: width must be > 0");
  const double k = std::floor(value / width);
  std::ostringstream out;
  out << "[" << k * width << "," << (k + 1) * width << ")";
  return out.str();
}

std::vector<std::string> discretize(const std::vector<double>& values,
                                    double width) {
  std::vector<std::string> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(discretize_value(v, width));
  return out;
}

NormStats normalize(Matrix& x, const std::optional<NormStats>& stats,
                    std::size_t f_width, std::size_t c_width,
                    std::size_t m_width, std::size_t r_width) {
  const auto width = static_cast<std::size_t>(x.cols());
  if (f_width + c_width + m_width + r_width != width)
    throw ValidationError("normalize: block widths do not sum to matrix width");

  NormStats out;
  out.f_width = f_width;
  out.c_width = c_width;
  out.m_width = m_width;
  out.r_width = r_width;
  if (stats) {
    if (stats->mean.size() != width)
      throw ValidationError("normalize: stats width mismatch");
    out = *stats;
  } else {
    out.mean.resize(width);
    out.stddev.resize(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto col = x.col(static_cast<Eigen::Index>(c));
      const double mean = col.mean();
      const double var = (col.array() - mean).square().mean();
      out.mean[c] = mean;
      out.stddev[c] = std::sqrt(var);
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    auto col = x.col(static_cast<Eigen::Index>(c));
    if (out.stddev[c] > 0.0) {
      col = (col.array() - out.mean[c]) / out.stddev[c];
    } else {
      col.setZero();  // constant feature carries no information
    }
  }
  return out;
}

SampleMatrices to_matrices(const SampleSet& set, ArchitectureKind arch,
                           const std::vector<std::string>& alphabet) {
  std::map<std::string, std::size_t> label_index;
  for (std::size_t i = 0; i < alphabet.size(); ++i) label_index[alphabet[i]] = i;

  const std::size_t base = 3 * set.place_count;
  const std::size_t width =
      arch == ArchitectureKind::Nap ? base : set.feature_width();

  std::vector<const TimedStateSample*> kept;
  for (const auto& s : set.samples)
    if (label_index.count(s.label)) kept.push_back(&s);

  SampleMatrices out;
  out.alphabet = alphabet;
  out.x = Matrix(static_cast<Eigen::Index>(kept.size()),
                 static_cast<Eigen::Index>(width));
  out.y.reserve(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    if (kept[r]->features.size() != set.feature_width())
      throw ValidationError("to_matrices: inconsistent feature width");
    for (std::size_t c = 0; c < width; ++c)
      out.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          kept[r]->features[c];
    out.y.push_back(label_index.at(kept[r]->label));
  }
  return out;
}

namespace {

// Replaces continuous attribute values with their bin label so the R block
// vocabulary is purely categorical.
EventLog discretize_log_attributes(const EventLog& log, double width) {
  EventLog out = log;
  for (auto& trace : out.traces) {
    for (auto& inst : trace.instances) {
      for (auto& [name, value] : inst.attributes) {
        auto kind = out.attribute_schema.find(name);
        if (kind == out.attribute_schema.end() ||
            kind->second != AttributeKind::Continuous) {
          continue;
        }
        try {
          value = discretize_value(std::stod(value), width);
        } catch (const std::invalid_argument&) {
          throw ValidationError("non-numeric value '" + value +
                                "' in continuous attribute '" + name + "'");
        }
      }
    }
  }
  return out;
}

std::vector<std::string> build_vocabulary(const EventLog& log) {
  std::set<std::string> values;
  for (const auto& trace : log.traces)
    for (const auto& inst : trace.instances)
      for (const auto& [name, value] : inst.attributes)
        if (log.attribute_schema.count(name))
          values.insert(name + "=" + value);
  return {values.begin(), values.end()};
}

void zero_first_columns(Matrix& x, std::size_t n) {
  x.leftCols(static_cast<Eigen::Index>(std::min(
      n, static_cast<std::size_t>(x.cols())))).setZero();
}

FoldOutcome run_fold(const RunConfig& cfg, std::size_t fold_idx,
                     const Fold& fold, const std::vector<PetriNet>& candidates) {
  FoldOutcome outcome;
  outcome.fold = fold_idx;

  const auto selection =
      select_model(candidates, fold.train, cfg.replay_policy);
  outcome.chosen_model = selection.best_index;
  outcome.chosen_fitness = selection.fitness_scores[selection.best_index];
  const PetriNet& net = candidates[selection.best_index];

  const EventLog train_log =
      discretize_log_attributes(fold.train, cfg.discretization_width);
  const EventLog test_log =
      discretize_log_attributes(fold.test, cfg.discretization_width);

  DecayModel decay = estimate_alphas(net, train_log, cfg.beta, cfg.replay_policy);
  decay.trained_on = "fold-" + std::to_string(fold_idx);
  const std::vector<std::string> vocabulary = build_vocabulary(train_log);

  // 90/10 train/validation split, by trace.
  std::vector<std::size_t> order(train_log.traces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(cfg.seed * 7919 + fold_idx);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = std::max<std::size_t>(1, order.size() / 10);
  EventLog fit_log, val_log;
  fit_log.attribute_schema = train_log.attribute_schema;
  val_log.attribute_schema = train_log.attribute_schema;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val_log : fit_log).traces.push_back(train_log.traces[order[i]]);
  }
  finalize_log(fit_log);
  finalize_log(val_log);

  SampleOptions opts;
  opts.policy = cfg.replay_policy;
  const SampleSet fit_set = build_samples(decay, fit_log, vocabulary, opts);
  const SampleSet val_set = build_samples(decay, val_log, vocabulary, opts);
  const SampleSet test_set = build_samples(decay, test_log, vocabulary, opts);

  std::vector<std::string> alphabet(train_log.alphabet.begin(),
                                    train_log.alphabet.end());
  auto fit_m = to_matrices(fit_set, cfg.architecture, alphabet);
  auto val_m = to_matrices(val_set, cfg.architecture, alphabet);
  auto test_m = to_matrices(test_set, cfg.architecture, alphabet);
  if (fit_m.x.rows() == 0)
    throw ValidationError("fold produced no training samples");

  const std::size_t np = net.places.size();
  if (cfg.zero_decay_block) {
    zero_first_columns(fit_m.x, np);
    zero_first_columns(val_m.x, np);
    zero_first_columns(test_m.x, np);
  }

  const std::size_t r_width =
      cfg.architecture == ArchitectureKind::Napr ? vocabulary.size() : 0;
  const auto stats =
      normalize(fit_m.x, std::nullopt, np, np, np, r_width);
  normalize(val_m.x, stats, np, np, np, r_width);
  normalize(test_m.x, stats, np, np, np, r_width);

  const std::uint64_t model_seed = cfg.seed * 104729 + fold_idx;
  MlpModel model =
      cfg.architecture == ArchitectureKind::Nap
          ? build_dream_nap(static_cast<std::size_t>(fit_m.x.cols()),
                            alphabet.size(), model_seed)
          : build_dream_napr(static_cast<std::size_t>(fit_m.x.cols()),
                             alphabet.size(), cfg.napr_activation, model_seed);

  TrainConfig tc;
  tc.batch_size = cfg.batch_size.value_or(
      cfg.architecture == ArchitectureKind::Nap ? 64 : 100);
  tc.max_epochs = cfg.max_epochs.value_or(100);
  tc.learning_rate = cfg.learning_rate.value_or(0.001);

  const Matrix fit_y = one_hot(fit_m.y, alphabet.size());
  const Matrix val_y = one_hot(val_m.y, alphabet.size());
  const auto train_result = train(model, fit_m.x, fit_y, val_m.x, val_y, tc);
  outcome.history = train_result.history;

  if (test_m.x.rows() == 0)
    throw ValidationError("fold produced no test samples");
  const Matrix probs = model.forward(test_m.x, false);
  outcome.report = evaluate(probs, test_m.y, alphabet);
  outcome.completed = true;
  return outcome;
}

}  // namespace

ExperimentSummary run_experiment(const RunConfig& cfg, const EventLog& log,
                                 const std::vector<PetriNet>& candidates) {
  if (candidates.empty())
    throw ValidationError("run_experiment: no model candidates");

  EventLog working = log;
  if (cfg.attribute_filter) {
    working = filter_by_attribute(log, cfg.attribute_filter->first,
                                  cfg.attribute_filter->second);
  }
  const auto folds = split_folds(working, cfg.k_folds, cfg.seed);

  ExperimentSummary summary;
  summary.folds.resize(folds.size());

  std::size_t workers = 1;
  if (const char* env = std::getenv("DREAM_WORKERS")) {
    workers = std::max<std::size_t>(1, std::strtoul(env, nullptr, 10));
  }
  workers = std::min(workers, folds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next.fetch_add(1); f < folds.size();
         f = next.fetch_add(1)) {
      try {
        summary.folds[f] = run_fold(cfg, f, folds[f], candidates);
      } catch (const std::exception& e) {
        summary.folds[f].fold = f;
        summary.folds[f].completed = false;
        summary.folds[f].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  auto collect = [&](const std::string& name, auto getter) {
    std::vector<double> values;
    for (const auto& f : summary.folds)
      if (f.completed) values.push_back(getter(f));
    if (values.empty()) return;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    summary.mean_metrics[name] = mean;
    summary.std_metrics[name] = std::sqrt(var);
  };
  collect("accuracy", [](const FoldOutcome& f) { return f.report.accuracy_top1; });
  collect("accuracy_eq15",
          [](const FoldOutcome& f) { return f.report.accuracy_eq15; });
  collect("precision", [](const FoldOutcome& f) { return f.report.precision; });
  collect("recall", [](const FoldOutcome& f) { return f.report.recall; });
  collect("f_score", [](const FoldOutcome& f) { return f.report.f_score; });
  collect("auc", [](const FoldOutcome& f) { return f.report.auc; });
  collect("fitness", [](const FoldOutcome& f) { return f.chosen_fitness; });
  return summary;
}

std::string ExperimentSummary::to_json() const {
  nlohmann::ordered_json j;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["completed"] = f.completed;
    if (!f.completed) {
      fj["error"] = f.error;
    } else {
      fj["chosen_model"] = f.chosen_model;
      fj["chosen_fitness"] = f.chosen_fitness;
      fj["accuracy"] = f.report.accuracy_top1;
      fj["accuracy_eq15"] = f.report.accuracy_eq15;
      fj["precision"] = f.report.precision;
      fj["recall"] = f.report.recall;
      fj["f_score"] = f.report.f_score;
      fj["auc"] = f.report.auc;
    }
    j["folds"].push_back(std::move(fj));
  }
  j["mean"] = mean_metrics;
  j["std"] = std_metrics;
  return j.dump(2);
}

ExperimentSummary run_experiment_files(const RunConfig& cfg) {
  EventLog log;
  if (cfg.log_path.size() >= 4 &&
      cfg.log_path.substr(cfg.log_path.size() - 4) == ".xes") {
    log = parse_xes_file(cfg.log_path);
    log.attribute_schema = cfg.csv_mapping.attribute_columns;
  } else {
    log = parse_csv_file(cfg.log_path, cfg.csv_mapping);
  }
  std::vector<PetriNet> candidates;
  for (const auto& path : cfg.model_paths)
    candidates.push_back(parse_pnml_file(path));

  const auto summary = run_experiment(cfg, log, candidates);

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream json_out(cfg.output_dir + "/summary.json");
    json_out << summary.to_json() << "\n";

    std::ofstream csv_out(cfg.output_dir + "/folds.csv");
    csv_out << "fold,completed,chosen_model,chosen_fitness,accuracy,"
               "precision,recall,f_score,auc\n";
    for (const auto& f : summary.folds) {
      csv_out << f.fold << "," << (f.completed ? 1 : 0) << ","
              << f.chosen_model << "," << f.chosen_fitness << ","
              << f.report.accuracy_top1 << "," << f.report.precision << ","
              << f.report.recall << "," << f.report.f_score << ","
              << f.report.auc << "\n";
    }
    for (const auto& f : summary.folds) {
      if (!f.completed) continue;
      std::ofstream hist(cfg.output_dir + "/history_fold" +
                         std::to_string(f.fold) + ".csv");
      hist << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
      for (const auto& e : f.history) {
        hist << e.epoch << "," << e.train_loss << "," << e.train_accuracy
             << "," << e.val_loss << "," << e.val_accuracy << "\n";
      }
    }
  }
  return summary;
}

}  // namespace dream
