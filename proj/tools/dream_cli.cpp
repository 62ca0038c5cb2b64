// dream: decay-enhanced Petri-net state sampling and next-activity
// prediction. Subcommands cover the individual pipeline stages (replay,
// enhance, sample, train, evaluate), the full cross-validation protocol
// (run), and a synthetic-log generator (simulate).
//
// Exit codes: 0 success, 2 validation/parse errors, 1 other failures.
// DREAM_WORKERS caps the number of parallel folds in `run`.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dream/decay.hpp"
#include "dream/event_log.hpp"
#include "dream/metrics.hpp"
#include "dream/neural.hpp"
#include "dream/petri_net.hpp"
#include "dream/pipeline.hpp"
#include "dream/replay.hpp"
#include "dream/simulate.hpp"

namespace {

using namespace dream;

struct LogOptions {
  std::string path;
  CsvMapping mapping;
  std::vector<std::string> attributes;  // "name:categorical|continuous"
};

void add_log_options(CLI::App& cmd, LogOptions& opts) {
  cmd.add_option("--log", opts.path, "Event log (.xes or .csv)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd.add_option("--case-column", opts.mapping.case_column,
                 "CSV column holding the case id")
      ->default_val("case");
  cmd.add_option("--event-column", opts.mapping.event_column,
                 "CSV column holding the event name")
      ->default_val("event");
  cmd.add_option("--timestamp-column", opts.mapping.timestamp_column,
                 "CSV column holding the timestamp")
      ->default_val("timestamp");
  cmd.add_option("--attribute", opts.attributes,
                 "Attribute column as name:categorical or name:continuous "
                 "(repeatable)");
}

std::map<std::string, AttributeKind> parse_attributes(
    const std::vector<std::string>& specs) {
  std::map<std::string, AttributeKind> out;
  for (const auto& spec : specs) {
    const auto sep = spec.rfind(':');
    const std::string name = spec.substr(0, sep);
    const std::string kind = sep == std::string::npos ? "" : spec.substr(sep + 1);
    if (name.empty() || (kind != "categorical" && kind != "continuous"))
      throw ValidationError("attribute must be name:categorical or "
                            "name:continuous, got '" + spec + "'");
    out[name] = kind == "categorical" ? AttributeKind::Categorical
                                      : AttributeKind::Continuous;
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

EventLog load_log(const LogOptions& opts) {
  if (ends_with(opts.path, ".xes")) return parse_xes_file(opts.path);
  CsvMapping mapping = opts.mapping;
  mapping.attribute_columns = parse_attributes(opts.attributes);
  return parse_csv_file(opts.path, mapping);
}

ReplayPolicy make_policy(const std::string& unknown, std::size_t depth) {
  ReplayPolicy policy;
  policy.unknown_events = unknown == "error" ? UnknownEventPolicy::Error
                                             : UnknownEventPolicy::Skip;
  policy.hidden_search_depth = depth;
  return policy;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  return out;
}

/// "name=value" vocabulary over the log's attributes; continuous values are
/// discretized into fixed-width left-closed bins first.
std::vector<std::string> build_vocabulary(const EventLog& log, double width) {
  std::set<std::string> vocab;
  for (const auto& trace : log.traces)
    for (const auto& inst : trace.instances)
      for (const auto& [name, value] : inst.attributes) {
        const auto kind = log.attribute_schema.find(name);
        if (kind != log.attribute_schema.end() &&
            kind->second == AttributeKind::Continuous)
          vocab.insert(name + "=" + discretize_value(std::stod(value), width));
        else
          vocab.insert(name + "=" + value);
      }
  return {vocab.begin(), vocab.end()};
}

// ---------------------------------------------------------------------------

int cmd_replay(const LogOptions& log_opts, const std::string& model_path,
               const std::string& unknown, std::size_t depth,
               const std::string& csv_out) {
  const EventLog log = load_log(log_opts);
  const PetriNet net = parse_pnml_file(model_path);
  const ReplayPolicy policy = make_policy(unknown, depth);
  const ReplayStats stats = replay_log(net, log, policy);
  std::cout << "{\"fitness\": " << fitness(stats)
            << ", \"missing\": " << stats.missing
            << ", \"consumed\": " << stats.consumed
            << ", \"remaining\": " << stats.remaining
            << ", \"produced\": " << stats.produced
            << ", \"skipped_events\": " << stats.skipped_events << "}\n";
  if (!csv_out.empty()) {
    auto out = open_out(csv_out);
    export_replay_csv(net, log, policy, out);
  }
  return 0;
}

int cmd_enhance(const LogOptions& log_opts, const std::string& model_path,
                double beta, const std::string& out_path) {
  const EventLog log = load_log(log_opts);
  const PetriNet net = parse_pnml_file(model_path);
  DecayModel model = estimate_alphas(net, log, beta);
  model.trained_on = log_opts.path;
  auto out = open_out(out_path);
  save_decay_model(model, out);
  std::cout << "decay model with " << model.alpha.size() << " places -> "
            << out_path << "\n";
  return 0;
}

int cmd_sample(const LogOptions& log_opts, const std::string& decay_path,
               double width, const std::string& csv_path,
               const std::string& sidecar_path, const std::string& unknown,
               std::size_t depth, bool initial_sample) {
  const EventLog log = load_log(log_opts);
  auto decay_in = open_in(decay_path);
  const DecayModel model = load_decay_model(decay_in);
  SampleOptions options;
  options.policy = make_policy(unknown, depth);
  options.emit_initial_sample = initial_sample;
  const auto vocabulary = build_vocabulary(log, width);
  const SampleSet set = build_samples(model, log, vocabulary, options);
  auto csv = open_out(csv_path);
  auto sidecar = open_out(sidecar_path);
  serialize_samples(set, csv, sidecar, model);
  std::cout << set.samples.size() << " samples x " << set.feature_width()
            << " features -> " << csv_path << "\n";
  return 0;
}

SampleMatrices load_matrices(const std::string& csv_path,
                             const std::string& sidecar_path,
                             ArchitectureKind arch,
                             std::vector<std::string>* alphabet_out) {
  auto csv = open_in(csv_path);
  auto sidecar = open_in(sidecar_path);
  const SampleSet set = deserialize_samples(csv, sidecar);
  if (alphabet_out) *alphabet_out = set.label_alphabet;
  return to_matrices(set, arch, set.label_alphabet);
}

int cmd_train(const std::string& csv_path, const std::string& sidecar_path,
              const std::string& arch_name, const std::string& activation,
              std::size_t epochs, std::size_t batch, double lr,
              double val_fraction, std::uint64_t seed,
              const std::string& out_path) {
  const auto arch = arch_name == "napr" ? ArchitectureKind::Napr
                                        : ArchitectureKind::Nap;
  std::vector<std::string> alphabet;
  SampleMatrices m = load_matrices(csv_path, sidecar_path, arch, &alphabet);
  if (m.x.rows() < 2) throw ValidationError("need at least two samples");

  // shuffle rows, then hold out the tail as the validation set
  std::vector<Eigen::Index> order(m.x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const Eigen::Index n_val = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(val_fraction * m.x.rows()));
  const Eigen::Index n_fit = m.x.rows() - n_val;
  if (n_fit < 1) throw ValidationError("validation fraction leaves no data");
  Matrix fit_x(n_fit, m.x.cols()), val_x(n_val, m.x.cols());
  std::vector<std::size_t> fit_y, val_y;
  for (Eigen::Index i = 0; i < m.x.rows(); ++i) {
    if (i < n_fit) {
      fit_x.row(i) = m.x.row(order[i]);
      fit_y.push_back(m.y[order[i]]);
    } else {
      val_x.row(i - n_fit) = m.x.row(order[i]);
      val_y.push_back(m.y[order[i]]);
    }
  }

  MlpModel model =
      arch == ArchitectureKind::Nap
          ? build_dream_nap(static_cast<std::size_t>(m.x.cols()),
                            alphabet.size(), seed)
          : build_dream_napr(static_cast<std::size_t>(m.x.cols()),
                             alphabet.size(),
                             activation == "sigmoid" ? Activation::Sigmoid
                                                     : Activation::Relu,
                             seed);
  TrainConfig tc;
  tc.max_epochs = epochs;
  tc.batch_size = batch;
  tc.learning_rate = lr;
  const auto result = train(model, fit_x, one_hot(fit_y, alphabet.size()),
                            val_x, one_hot(val_y, alphabet.size()), tc);
  auto out = open_out(out_path);
  model.save(out, alphabet);
  const auto& best = result.history[result.best_epoch - 1];
  std::cout << "trained " << result.history.size() << " epochs; best epoch "
            << result.best_epoch << " (val_loss " << best.val_loss
            << ", val_accuracy " << best.val_accuracy << ") -> " << out_path
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& csv_path, const std::string& sidecar_path,
                 const std::string& model_path) {
  auto model_in = open_in(model_path);
  std::vector<std::string> alphabet;
  MlpModel model = MlpModel::load(model_in, &alphabet);
  auto csv = open_in(csv_path);
  auto sidecar = open_in(sidecar_path);
  const SampleSet set = deserialize_samples(csv, sidecar);
  const auto arch = model.input_width() == set.feature_width()
                        ? ArchitectureKind::Napr
                        : ArchitectureKind::Nap;
  const SampleMatrices m = to_matrices(set, arch, alphabet);
  if (static_cast<std::size_t>(m.x.cols()) != model.input_width())
    throw ValidationError("sample width does not match the model input");
  const Matrix probs = model.forward(m.x, false);
  std::cout << evaluate(probs, m.y, alphabet).to_json() << "\n";
  return 0;
}

int cmd_run(RunConfig& cfg, const LogOptions& log_opts,
            const std::string& arch_name, const std::string& activation,
            const std::string& unknown, std::size_t depth) {
  cfg.log_path = log_opts.path;
  cfg.csv_mapping = log_opts.mapping;
  cfg.csv_mapping.attribute_columns = parse_attributes(log_opts.attributes);
  cfg.architecture = arch_name == "napr" ? ArchitectureKind::Napr
                                         : ArchitectureKind::Nap;
  cfg.napr_activation =
      activation == "sigmoid" ? Activation::Sigmoid : Activation::Relu;
  cfg.replay_policy = make_policy(unknown, depth);
  const auto summary = run_experiment_files(cfg);
  std::size_t failed = 0;
  for (const auto& fold : summary.folds)
    if (!fold.completed) {
      ++failed;
      std::cerr << "fold " << fold.fold << " failed: " << fold.error << "\n";
    }
  std::cout << summary.folds.size() - failed << "/" << summary.folds.size()
            << " folds completed";
  for (const std::string key : {"accuracy", "fitness", "f_score"}) {
    const auto it = summary.mean_metrics.find(key);
    if (it != summary.mean_metrics.end())
      std::cout << "; " << key << " " << it->second << " +/- "
                << summary.std_metrics.at(key);
  }
  std::cout << "; reports in " << cfg.output_dir << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_simulate(const std::string& net_path, std::size_t traces,
                 std::uint64_t seed, const std::string& out_path) {
  auto in = open_in(net_path);
  const auto base_dir =
      std::filesystem::path(net_path).parent_path().string();
  const TimedNet spec = load_timed_net(in, base_dir.empty() ? "." : base_dir);
  const EventLog log = simulate_log(spec, traces, seed);
  auto out = open_out(out_path);
  serialize_csv(log, out);
  std::cout << log.traces.size() << " traces, " << log.total_instances()
            << " instances -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decay-enhanced Petri-net sampling and next-activity "
               "prediction"};
  app.require_subcommand(1);

  // replay -------------------------------------------------------------
  LogOptions replay_log_opts;
  std::string replay_model, replay_unknown = "skip", replay_csv;
  std::size_t replay_depth = 10;
  auto* replay_cmd =
      app.add_subcommand("replay", "Token-based replay fitness report");
  add_log_options(*replay_cmd, replay_log_opts);
  replay_cmd->add_option("--model", replay_model, "PNML model")
      ->required()
      ->check(CLI::ExistingFile);
  replay_cmd->add_option("--unknown-events", replay_unknown,
                         "Policy for events missing from the model")
      ->check(CLI::IsMember({"skip", "error"}));
  replay_cmd->add_option("--hidden-depth", replay_depth,
                         "Hidden-transition search depth");
  replay_cmd->add_option("--firings-csv", replay_csv,
                         "Optional per-firing debug CSV");

  // enhance ------------------------------------------------------------
  LogOptions enhance_log_opts;
  std::string enhance_model, enhance_out;
  double enhance_beta = 1.0;
  auto* enhance_cmd = app.add_subcommand(
      "enhance", "Estimate per-place decay rates; write a decay model");
  add_log_options(*enhance_cmd, enhance_log_opts);
  enhance_cmd->add_option("--model", enhance_model, "PNML model")
      ->required()
      ->check(CLI::ExistingFile);
  enhance_cmd->add_option("--beta", enhance_beta, "Decay response at zero age")
      ->check(CLI::PositiveNumber);
  enhance_cmd->add_option("--out", enhance_out, "Decay model output path")
      ->required();

  // sample -------------------------------------------------------------
  LogOptions sample_log_opts;
  std::string sample_decay, sample_csv, sample_sidecar;
  std::string sample_unknown = "skip";
  std::size_t sample_depth = 10;
  double sample_width = 20.0;
  bool sample_initial = false;
  auto* sample_cmd = app.add_subcommand(
      "sample", "Replay a log on a decay model; emit timed state samples");
  add_log_options(*sample_cmd, sample_log_opts);
  sample_cmd->add_option("--decay-model", sample_decay, "Saved decay model")
      ->required()
      ->check(CLI::ExistingFile);
  sample_cmd->add_option("--out-csv", sample_csv, "Sample matrix CSV")
      ->required();
  sample_cmd->add_option("--out-sidecar", sample_sidecar, "JSON sidecar")
      ->required();
  sample_cmd->add_option("--discretization-width", sample_width,
                         "Bin width for continuous attributes")
      ->check(CLI::PositiveNumber);
  sample_cmd->add_option("--unknown-events", sample_unknown,
                         "Policy for events missing from the model")
      ->check(CLI::IsMember({"skip", "error"}));
  sample_cmd->add_option("--hidden-depth", sample_depth,
                         "Hidden-transition search depth");
  sample_cmd->add_flag("--initial-sample", sample_initial,
                       "Also emit a sample for the initial marking");

  // train --------------------------------------------------------------
  std::string train_csv, train_sidecar, train_out;
  std::string train_arch = "nap", train_activation = "relu";
  std::size_t train_epochs = 100, train_batch = 64;
  double train_lr = 0.001, train_val = 0.1;
  std::uint64_t train_seed = 1;
  auto* train_cmd =
      app.add_subcommand("train", "Train a network on serialized samples");
  train_cmd->add_option("--samples", train_csv, "Sample matrix CSV")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--sidecar", train_sidecar, "JSON sidecar")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--architecture", train_arch, "nap or napr")
      ->check(CLI::IsMember({"nap", "napr"}));
  train_cmd->add_option("--activation", train_activation,
                        "Hidden activation (napr only)")
      ->check(CLI::IsMember({"relu", "sigmoid"}));
  train_cmd->add_option("--epochs", train_epochs, "Epoch budget");
  train_cmd->add_option("--batch-size", train_batch, "Minibatch size");
  train_cmd->add_option("--learning-rate", train_lr, "Adam learning rate")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--validation-fraction", train_val,
                        "Held-out fraction for snapshot selection")
      ->check(CLI::Range(0.0, 0.9));
  train_cmd->add_option("--seed", train_seed, "RNG seed");
  train_cmd->add_option("--out", train_out, "Model output path")->required();

  // evaluate -----------------------------------------------------------
  std::string eval_csv, eval_sidecar, eval_model;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Evaluate a trained network on serialized samples");
  eval_cmd->add_option("--samples", eval_csv, "Sample matrix CSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--sidecar", eval_sidecar, "JSON sidecar")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--model", eval_model, "Trained model")
      ->required()
      ->check(CLI::ExistingFile);

  // run ----------------------------------------------------------------
  RunConfig run_cfg;
  LogOptions run_log_opts;
  std::string run_arch = "nap", run_activation = "relu";
  std::string run_unknown = "skip";
  std::size_t run_depth = 10;
  std::size_t run_batch = 0, run_epochs = 0;
  double run_lr = 0.0;
  auto* run_cmd = app.add_subcommand(
      "run", "Full cross-validation protocol; writes summary + fold reports");
  add_log_options(*run_cmd, run_log_opts);
  run_cmd->add_option("--model", run_cfg.model_paths,
                      "PNML candidate (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--output-dir", run_cfg.output_dir, "Report directory")
      ->required();
  run_cmd->add_option("--folds", run_cfg.k_folds, "Cross-validation folds");
  run_cmd->add_option("--seed", run_cfg.seed, "RNG seed");
  run_cmd->add_option("--beta", run_cfg.beta, "Decay response at zero age")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--architecture", run_arch, "nap or napr")
      ->check(CLI::IsMember({"nap", "napr"}));
  run_cmd->add_option("--activation", run_activation,
                      "Hidden activation (napr only)")
      ->check(CLI::IsMember({"relu", "sigmoid"}));
  run_cmd->add_option("--discretization-width", run_cfg.discretization_width,
                      "Bin width for continuous attributes")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--batch-size", run_batch, "Minibatch size override");
  run_cmd->add_option("--epochs", run_epochs, "Epoch budget override");
  run_cmd->add_option("--learning-rate", run_lr, "Learning rate override");
  run_cmd->add_option("--unknown-events", run_unknown,
                      "Policy for events missing from the model")
      ->check(CLI::IsMember({"skip", "error"}));
  run_cmd->add_option("--hidden-depth", run_depth,
                      "Hidden-transition search depth");
  run_cmd->add_flag("--zero-decay-block", run_cfg.zero_decay_block,
                    "Ablation: zero the decay-response feature block");

  // simulate -----------------------------------------------------------
  std::string sim_net, sim_out;
  std::size_t sim_traces = 100;
  std::uint64_t sim_seed = 1;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Sample a synthetic log from an annotated net");
  sim_cmd->add_option("--net", sim_net,
                      "Timed-net JSON (pnml/pnml_path, delays, rules)")
      ->required()
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--traces", sim_traces, "Number of traces");
  sim_cmd->add_option("--seed", sim_seed, "RNG seed");
  sim_cmd->add_option("--out", sim_out, "Log CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad flags are validation errors
  }

  try {
    if (replay_cmd->parsed())
      return cmd_replay(replay_log_opts, replay_model, replay_unknown,
                        replay_depth, replay_csv);
    if (enhance_cmd->parsed())
      return cmd_enhance(enhance_log_opts, enhance_model, enhance_beta,
                         enhance_out);
    if (sample_cmd->parsed())
      return cmd_sample(sample_log_opts, sample_decay, sample_width,
                        sample_csv, sample_sidecar, sample_unknown,
                        sample_depth, sample_initial);
    if (train_cmd->parsed())
      return cmd_train(train_csv, train_sidecar, train_arch, train_activation,
                       train_epochs, train_batch, train_lr, train_val,
                       train_seed, train_out);
    if (eval_cmd->parsed())
      return cmd_evaluate(eval_csv, eval_sidecar, eval_model);
    if (run_cmd->parsed()) {
      if (run_batch > 0) run_cfg.batch_size = run_batch;
      if (run_epochs > 0) run_cfg.max_epochs = run_epochs;
      if (run_lr > 0.0) run_cfg.learning_rate = run_lr;
      return cmd_run(run_cfg, run_log_opts, run_arch, run_activation,
                     run_unknown, run_depth);
    }
    if (sim_cmd->parsed())
      return cmd_simulate(sim_net, sim_traces, sim_seed, sim_out);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
