// Acceptance suite: one pass/fail line per criterion, non-zero exit if any
// criterion fails. Criterion 7 (external benchmark reproduction) is optional
// and reports SKIP when the dataset is not available.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "dream/decay.hpp"
#include "dream/event_log.hpp"
#include "dream/metrics.hpp"
#include "dream/neural.hpp"
#include "dream/petri_net.hpp"
#include "dream/pipeline.hpp"
#include "dream/replay.hpp"
#include "dream/simulate.hpp"

using namespace dream;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Criterion {
  int id;
  std::string description;
  bool (*run)(std::string& detail);
};

// ---------------------------------------------------------------------------
// Shared toy-net generator: a chain of 3-6 places with forward transitions
// and optional loop-back transitions, so some places re-enter within a trace.
// ---------------------------------------------------------------------------

TimedNet random_toy_net(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> place_count(3, 6);
  const std::size_t k = place_count(rng);
  TimedNet spec;
  PetriNet& net = spec.net;
  for (std::size_t p = 0; p < k; ++p) net.places.push_back("p" + std::to_string(p));
  for (std::size_t p = 0; p + 1 < k; ++p) {
    const std::string label = "a" + std::to_string(p);
    net.transitions.push_back({"t" + label, label});
    net.pre.push_back({p});
    net.post.push_back({p + 1});
    spec.delays[label] = DelaySpec::uniform(1.0, 10.0);
  }
  // loop-backs (never self-loops) make some places multi-entry
  std::uniform_int_distribution<int> n_back(0, 2);
  const int backs = n_back(rng);
  for (int b = 0; b < backs; ++b) {
    std::uniform_int_distribution<std::size_t> from(1, k - 2);
    const std::size_t j = from(rng);
    std::uniform_int_distribution<std::size_t> to(0, j - 1);
    const std::size_t m = to(rng);
    const std::string label = "r" + std::to_string(b);
    if (net.transition_by_label(label)) continue;
    net.transitions.push_back({"t" + label, label});
    net.pre.push_back({j});
    net.post.push_back({m});
    spec.delays[label] = DelaySpec::uniform(1.0, 10.0);
  }
  net.source_place = 0;
  net.sink_place = k - 1;
  net.initial_marking.tokens.assign(k, 0);
  net.initial_marking.tokens[0] = 1;
  return spec;
}

// ---------------------------------------------------------------------------
// Criterion 1: decay-response arithmetic, 10,000 random triples.
// ---------------------------------------------------------------------------

bool criterion_decay(std::string& detail) {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u_beta(0.01, 10.0);
  std::uniform_real_distribution<double> u_alpha(0.001, 5.0);
  std::uniform_real_distribution<double> u_delta(0.0, 100.0);

  PetriNet net;
  net.places = {"p"};
  net.initial_marking.tokens = {0};

  for (int i = 0; i < 10000; ++i) {
    const double beta = u_beta(rng);
    const double alpha = u_alpha(rng);
    const double delta = u_delta(rng);
    DecayModel model{net, beta, {alpha}, ""};
    DecayState state = DecayState::reset(net, 0);
    state.last_entry[0] = 0.0;
    const double f = decay_response(model, state, delta)[0];
    const double expected = delta < beta / alpha ? beta - alpha * delta : 0.0;
    if (f != expected) {
      detail = "piecewise value mismatch";
      return false;
    }
    if (!(f >= 0.0 && f <= beta)) {
      detail = "response out of [0, beta]";
      return false;
    }
    if (decay_response(model, state, 0.0)[0] != beta) {
      detail = "response at delta=0 is not beta";
      return false;
    }
    DecayState unset = DecayState::reset(net, 0);
    if (decay_response(model, unset, delta)[0] != 0.0) {
      detail = "unset place must respond 0";
      return false;
    }
  }
  const double t = seconds_since(start);
  detail = "10000 triples in " + std::to_string(t) + " s";
  return t < 1.0;
}

// ---------------------------------------------------------------------------
// Criterion 2: alpha estimation vs an independent brute-force oracle that
// materializes every token entry/exit by direct enumeration.
// ---------------------------------------------------------------------------

std::vector<double> oracle_alphas(const PetriNet& net, const EventLog& log,
                                  double beta) {
  const std::size_t np = net.places.size();
  double delta_max = 0.0;
  for (const auto& trace : log.traces)
    delta_max = std::max(delta_max, trace.duration());

  std::vector<long long> max_entries(np, 0);
  std::vector<double> gap_mean_sum(np, 0.0);
  std::vector<long long> gap_traces(np, 0);

  for (const auto& trace : log.traces) {
    std::vector<long long> entries(np, 0);
    std::vector<std::optional<double>> pending_exit(np);
    std::vector<double> gap_sum(np, 0.0);
    std::vector<long long> gap_count(np, 0);
    for (const auto& inst : trace.instances) {
      const auto t = net.transition_by_label(inst.event_name);
      if (!t) continue;
      for (const std::size_t p : net.pre[*t]) pending_exit[p] = inst.timestamp;
      for (const std::size_t p : net.post[*t]) {
        ++entries[p];
        if (pending_exit[p]) {
          gap_sum[p] += inst.timestamp - *pending_exit[p];
          ++gap_count[p];
          pending_exit[p].reset();
        }
      }
    }
    for (std::size_t p = 0; p < np; ++p) {
      max_entries[p] = std::max(max_entries[p], entries[p]);
      if (gap_count[p] > 0) {
        gap_mean_sum[p] += gap_sum[p] / static_cast<double>(gap_count[p]);
        ++gap_traces[p];
      }
    }
  }

  std::vector<double> alpha(np, beta / delta_max);
  for (std::size_t p = 0; p < np; ++p) {
    if (max_entries[p] <= 1 || gap_traces[p] == 0) continue;
    const double mean_gap = gap_mean_sum[p] / static_cast<double>(gap_traces[p]);
    if (mean_gap > 0.0) alpha[p] = beta / mean_gap;
  }
  return alpha;
}

bool criterion_alpha_oracle(std::string& detail) {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  int multi_entry_nets = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const TimedNet spec = random_toy_net(rng);
    const auto log = simulate_log(spec, 8, 1000 + trial);
    const double beta = 0.5 + 0.25 * (trial % 5);
    const auto model = estimate_alphas(spec.net, log, beta);
    const auto expected = oracle_alphas(spec.net, log, beta);
    if (model.alpha.size() != expected.size()) {
      detail = "alpha width mismatch";
      return false;
    }
    for (std::size_t p = 0; p < expected.size(); ++p) {
      if (std::abs(model.alpha[p] - expected[p]) > 1e-12) {
        detail = "trial " + std::to_string(trial) + " place " +
                 std::to_string(p) + ": " + std::to_string(model.alpha[p]) +
                 " vs oracle " + std::to_string(expected[p]);
        return false;
      }
    }
    if (spec.net.transitions.size() > spec.net.places.size() - 1)
      ++multi_entry_nets;  // has loop-backs, exercising the mean-gap branch
  }
  const double t = seconds_since(start);
  detail = "20 nets (" + std::to_string(multi_entry_nets) +
           " with loops) in " + std::to_string(t) + " s";
  return t < 10.0 && multi_entry_nets > 0;
}

// ---------------------------------------------------------------------------
// Criterion 3: fitness closure on simulated logs; alien events lower it;
// the worked token-count example.
// ---------------------------------------------------------------------------

bool criterion_fitness(std::string& detail) {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 10; ++trial) {
    const TimedNet spec = random_toy_net(rng);
    auto log = simulate_log(spec, 6, 500 + trial);
    const double fit = fitness(replay_log(spec.net, log));
    if (std::abs(fit - 1.0) > 1e-12) {
      detail = "self-generated log does not replay with fitness 1 (trial " +
               std::to_string(trial) + ", fitness " + std::to_string(fit) + ")";
      return false;
    }
    // duplicate the final event: its input place is already drained, so the
    // firing must be forced and fitness must strictly drop
    auto& trace = log.traces.front();
    EventInstance alien = trace.instances.back();
    alien.timestamp += 1.0;
    trace.instances.push_back(alien);
    const double broken = fitness(replay_log(spec.net, log));
    if (!(broken < fit)) {
      detail = "alien event did not lower fitness (trial " +
               std::to_string(trial) + ")";
      return false;
    }
  }
  ReplayStats worked;
  worked.missing = 2;
  worked.consumed = 10;
  worked.remaining = 2;
  worked.produced = 10;
  if (fitness(worked) != 0.8) {
    detail = "worked example (2,10,2,10) != 0.8";
    return false;
  }
  detail = "10 random nets, closure + strict decrease + worked value";
  return true;
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient correctness on random small nets.
// ---------------------------------------------------------------------------

bool criterion_gradients(std::string& detail) {
  const auto start = Clock::now();
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> depth_dist(1, 4);
  std::uniform_int_distribution<std::size_t> width_dist(2, 8);
  std::uniform_int_distribution<int> act_dist(0, 1);

  double worst_plain = 0.0, worst_bn = 0.0;
  for (int trial = 0; trial < 16; ++trial) {
    const bool with_bn = trial % 2 == 1;
    const std::size_t input = width_dist(rng);
    const std::size_t classes = 2 + trial % 3;
    std::vector<LayerSpec> specs;
    const std::size_t depth = depth_dist(rng);
    for (std::size_t d = 0; d + 1 < depth; ++d) {
      specs.push_back(LayerSpec::dense(width_dist(rng)));
      if (with_bn) specs.push_back(LayerSpec::batchnorm());
      specs.push_back(LayerSpec::activation(
          act_dist(rng) == 0 ? Activation::Relu : Activation::Sigmoid));
    }
    specs.push_back(LayerSpec::dense(classes));
    specs.push_back(LayerSpec::activation(Activation::Softmax));

    MlpModel model(input, specs, 9000 + trial);
    const std::size_t batch = 6;
    Matrix x(batch, input);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<std::size_t> labels(batch);
    for (auto& l : labels) l = rng() % classes;
    const Matrix y = one_hot(labels, classes);

    const double err = model.gradient_check(x, y, 200);
    const double bound = with_bn ? 1e-3 : 1e-4;
    (with_bn ? worst_bn : worst_plain) =
        std::max(with_bn ? worst_bn : worst_plain, err);
    if (err >= bound) {
      detail = "trial " + std::to_string(trial) + " error " +
               std::to_string(err) + " >= " + std::to_string(bound);
      return false;
    }
  }
  const double t = seconds_since(start);
  std::ostringstream msg;
  msg << "worst plain " << worst_plain << ", worst batchnorm " << worst_bn
      << " in " << t << " s";
  detail = msg.str();
  return t < 30.0;
}

// ---------------------------------------------------------------------------
// Criterion 5: end-to-end signal test. The generator hides the branch label
// in the elapsed time before the previous event, which only the decay block
// F can expose; zeroing F leaves marking/counts that carry no branch signal.
// ---------------------------------------------------------------------------

TimedNet branch_signal_net() {
  TimedNet spec;
  PetriNet& net = spec.net;
  // Each stage spans five parallel places so the decay signal survives
  // input dropout (a single informative column would be zeroed 20% of the
  // time, capping the attainable accuracy below the bound).
  constexpr int kCopies = 5;
  net.places.push_back("q0");
  std::vector<std::size_t> stage[4];
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < kCopies; ++i) {
      stage[s].push_back(net.places.size());
      net.places.push_back("q" + std::to_string(s + 1) + "_" +
                           std::to_string(i));
    }
  const std::size_t sink = net.places.size();
  net.places.push_back("q5");
  auto add = [&](const std::string& label, std::vector<std::size_t> from,
                 std::vector<std::size_t> to) {
    net.transitions.push_back({"t" + label, label});
    net.pre.push_back(std::move(from));
    net.post.push_back(std::move(to));
  };
  add("A", {0}, stage[0]);
  add("B", stage[0], stage[1]);
  std::vector<std::string> first_branch, second_branch;
  for (int i = 1; i <= 8; ++i) {
    add("B" + std::to_string(i), stage[1], stage[2]);
    first_branch.push_back("B" + std::to_string(i));
  }
  add("C", stage[2], stage[3]);
  for (int i = 1; i <= 8; ++i) {
    add("C" + std::to_string(i), stage[3], {sink});
    second_branch.push_back("C" + std::to_string(i));
  }
  net.source_place = 0;
  net.sink_place = sink;
  net.initial_marking.tokens.assign(net.places.size(), 0);
  net.initial_marking.tokens[0] = 1;

  spec.delays["A"] = DelaySpec::fixed(1.0);
  spec.delays["B"] = DelaySpec::uniform(0.0, 120.0);  // the first hidden gap
  spec.delays["C"] = DelaySpec::uniform(0.0, 120.0);  // the second hidden gap

  const std::vector<double> thresholds = {15, 30, 45, 60, 75, 90, 105};
  BranchRule rule1;  // Bi chosen by the elapsed time between A and B
  rule1.choices = first_branch;
  rule1.thresholds = thresholds;
  rule1.since_event = "A";
  rule1.delay = DelaySpec::fixed(0.0);
  spec.rules.push_back(rule1);

  BranchRule rule2;  // Ci chosen by the elapsed time between B and C
  rule2.choices = second_branch;
  rule2.thresholds = thresholds;
  rule2.since_event = "B";
  rule2.delay = DelaySpec::fixed(0.0);
  spec.rules.push_back(rule2);
  return spec;
}

bool criterion_end_to_end(std::string& detail) {
  const auto start = Clock::now();
  const TimedNet spec = branch_signal_net();
  const auto log = simulate_log(spec, 1000, 20240607);

  RunConfig cfg;
  cfg.k_folds = 10;
  cfg.seed = 5;
  cfg.max_epochs = 200;
  cfg.learning_rate = 0.002;

  const auto with_f = run_experiment(cfg, log, {spec.net});
  for (const auto& fold : with_f.folds)
    if (!fold.completed) {
      detail = "fold failed: " + fold.error;
      return false;
    }
  const double acc = with_f.mean_metrics.at("accuracy");

  RunConfig ablated = cfg;
  ablated.zero_decay_block = true;
  const auto without_f = run_experiment(ablated, log, {spec.net});
  for (const auto& fold : without_f.folds)
    if (!fold.completed) {
      detail = "ablated fold failed: " + fold.error;
      return false;
    }
  const double acc_ablated = without_f.mean_metrics.at("accuracy");

  const double t = seconds_since(start);
  std::ostringstream msg;
  msg << "accuracy " << acc << " (bound >= 0.90), ablated " << acc_ablated
      << " (bound <= 0.60) in " << t << " s";
  detail = msg.str();
  return acc >= 0.90 && acc_ablated <= 0.60 && t < 300.0;
}

// ---------------------------------------------------------------------------
// Criterion 6: sign-test adjusted alphas.
// ---------------------------------------------------------------------------

bool criterion_sign_test(std::string& detail) {
  const auto nine = sign_test(5, 4, 9);
  const auto eight = sign_test(4, 4, 8);
  std::ostringstream msg;
  msg << "n=9 -> " << nine.adjusted_alpha << ", n=8 -> " << eight.adjusted_alpha;
  detail = msg.str();
  return std::abs(nine.adjusted_alpha - 0.0057) < 5e-5 &&
         std::abs(eight.adjusted_alpha - 0.0064) < 5e-5;
}

// ---------------------------------------------------------------------------
// Criterion 7 (optional): full reproduction on the Helpdesk benchmark. Needs
// DREAM_HELPDESK_DIR with helpdesk.xes and one or more .pnml candidates.
// ---------------------------------------------------------------------------

bool criterion_helpdesk(std::string& detail) {
  const char* dir = std::getenv("DREAM_HELPDESK_DIR");
  if (dir == nullptr || !fs::exists(fs::path(dir) / "helpdesk.xes")) {
    detail = "SKIP: set DREAM_HELPDESK_DIR to a directory with helpdesk.xes "
             "and PNML candidates";
    return true;
  }
  const fs::path base(dir);
  const auto log = parse_xes_file((base / "helpdesk.xes").string());
  std::size_t instances = log.total_instances();
  if (instances != 13710 || log.traces.size() != 3804 ||
      log.alphabet.size() != 9) {
    std::ostringstream msg;
    msg << "parsed counts " << instances << "/" << log.traces.size() << "/"
        << log.alphabet.size() << " != 13710/3804/9";
    detail = msg.str();
    return false;
  }
  std::vector<PetriNet> candidates;
  std::vector<std::string> candidate_paths;
  for (const auto& entry : fs::directory_iterator(base))
    if (entry.path().extension() == ".pnml") {
      candidates.push_back(parse_pnml_file(entry.path().string()));
      candidate_paths.push_back(entry.path().string());
    }
  if (candidates.empty()) {
    detail = "no .pnml candidates next to helpdesk.xes";
    return false;
  }
  const auto selection = select_model(candidates, log);
  const double fit = selection.fitness_scores[selection.best_index];
  if (std::abs(fit - 0.928) > 0.02) {
    detail = "best-candidate fitness " + std::to_string(fit) +
             " outside 0.928 +/- 0.02";
    return false;
  }
  RunConfig cfg;
  cfg.k_folds = 10;
  cfg.seed = 1;
  const auto summary = run_experiment(cfg, log, candidates);
  const double acc = summary.mean_metrics.at("accuracy");
  std::ostringstream msg;
  msg << "fitness " << fit << ", accuracy " << acc;
  detail = msg.str();
  return std::abs(acc - 0.829) <= 0.03;
}

// ---------------------------------------------------------------------------
// Criterion 8: byte-identical summaries across identical runs.
// ---------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool criterion_determinism(std::string& detail) {
  const fs::path work = fs::temp_directory_path() / "dream_acceptance_runs";
  fs::remove_all(work);
  fs::create_directories(work);

  std::mt19937_64 rng(99);
  const TimedNet spec = random_toy_net(rng);
  const auto log = simulate_log(spec, 40, 8);
  {
    std::ofstream csv(work / "log.csv");
    serialize_csv(log, csv);
    std::ofstream pnml(work / "model.pnml");
    serialize_pnml(spec.net, pnml);
  }

  RunConfig cfg;
  cfg.log_path = (work / "log.csv").string();
  cfg.model_paths = {(work / "model.pnml").string()};
  cfg.k_folds = 4;
  cfg.seed = 3;
  cfg.max_epochs = 5;
  cfg.csv_mapping.case_column = "case";
  cfg.csv_mapping.event_column = "event";
  cfg.csv_mapping.timestamp_column = "timestamp";

  RunConfig first = cfg;
  first.output_dir = (work / "run1").string();
  fs::create_directories(first.output_dir);
  run_experiment_files(first);

  RunConfig second = cfg;
  second.output_dir = (work / "run2").string();
  fs::create_directories(second.output_dir);
  run_experiment_files(second);

  const std::string a = read_file(work / "run1" / "summary.json");
  const std::string b = read_file(work / "run2" / "summary.json");
  if (a.empty()) {
    detail = "summary.json missing or empty";
    return false;
  }
  detail = "summary.json " + std::to_string(a.size()) + " bytes, " +
           (a == b ? "identical" : "DIFFERENT");
  return a == b;
}

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "decay arithmetic (10,000 random triples, < 1 s)", criterion_decay},
      {2, "alpha estimation matches brute-force oracle (20 toy nets, 1e-12)",
       criterion_alpha_oracle},
      {3, "fitness: simulation closure, alien-event decrease, worked value",
       criterion_fitness},
      {4, "gradients vs central differences (random nets, with/without "
          "batchnorm)",
       criterion_gradients},
      {5, "end-to-end decay signal: accuracy >= 0.90 vs ablation <= 0.60",
       criterion_end_to_end},
      {6, "sign test adjusted alphas 0.0057 (n=9) / 0.0064 (n=8)",
       criterion_sign_test},
      {7, "optional Helpdesk reproduction (counts, fitness, accuracy)",
       criterion_helpdesk},
      {8, "determinism: byte-identical summary JSON across runs",
       criterion_determinism},
  };

  bool all_ok = true;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    all_ok = all_ok && ok;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": "
              << c.description;
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << std::endl;
  }
  return all_ok ? 0 : 1;
}
