#include "dream/decay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dream {

namespace {
constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
}

DecayState DecayState::reset(const PetriNet& net, std::size_t vocab_size) {
  DecayState s;
  s.last_entry.assign(net.places.size(), kUnset);
  s.token_counts.assign(net.places.size(), 0);
  s.attribute_counts.assign(vocab_size, 0);
  s.marking = net.initial_marking;
  if (s.marking.tokens.size() != net.places.size())
    s.marking = net.default_initial_marking();
  return s;
}

DecayModel estimate_alphas(const PetriNet& net, const EventLog& log,
                           double beta, const ReplayPolicy& policy) {
  if (beta <= 0.0) throw ValidationError("estimate_alphas: beta must be > 0");
  if (log.traces.empty())
    throw ValidationError("estimate_alphas: empty event log");

  const std::size_t np = net.places.size();
  double delta_max = 0.0;
  for (const auto& trace : log.traces)
    delta_max = std::max(delta_max, trace.duration());
  if (delta_max <= 0.0) {
    throw ValidationError(
        "estimate_alphas: max trace duration is zero; decay rates undefined");
  }

  // Per place: the largest entry count of any single trace, and the
  // reactivation gaps (token exit -> next token entry) pooled as per-trace
  // means.
  std::vector<long long> max_entries(np, 0);
  std::vector<double> gap_mean_sum(np, 0.0);
  std::vector<long long> gap_trace_count(np, 0);

  for (std::size_t i = 0; i < log.traces.size(); ++i) {
    ReplayContext ctx(net, policy, i);
    std::vector<long long> entries(np, 0);
    std::vector<double> last_exit(np, kUnset);
    std::vector<double> gap_sum(np, 0.0);
    std::vector<long long> gap_count(np, 0);
    const auto& trace = log.traces[i];
    for (std::size_t j = 0; j < trace.instances.size(); ++j) {
      auto step = ctx.step(trace.instances[j], j);
      for (const auto& exit : step.exits) last_exit[exit.place_index] = exit.time;
      for (const auto& entry : step.entries) {
        ++entries[entry.place_index];
        double& pending = last_exit[entry.place_index];
        if (!std::isnan(pending)) {
          gap_sum[entry.place_index] += entry.time - pending;
          ++gap_count[entry.place_index];
          pending = kUnset;
        }
      }
    }
    for (std::size_t p = 0; p < np; ++p) {
      max_entries[p] = std::max(max_entries[p], entries[p]);
      if (gap_count[p] > 0) {
        gap_mean_sum[p] += gap_sum[p] / static_cast<double>(gap_count[p]);
        ++gap_trace_count[p];
      }
    }
  }

  DecayModel model;
  model.net = net;
  model.beta = beta;
  model.alpha.assign(np, beta / delta_max);
  for (std::size_t p = 0; p < np; ++p) {
    if (max_entries[p] <= 1) continue;  // activated at most once per trace
    if (gap_trace_count[p] == 0) continue;  // no observed gap: keep fallback
    const double mean_gap =
        gap_mean_sum[p] / static_cast<double>(gap_trace_count[p]);
    if (mean_gap <= 0.0) continue;  // zero reactivation time: keep fallback
    model.alpha[p] = beta / mean_gap;
  }
  return model;
}

std::vector<double> decay_response(const DecayModel& model,
                                   const DecayState& state, double now) {
  std::vector<double> f(model.net.places.size(), 0.0);
  for (std::size_t p = 0; p < f.size(); ++p) {
    const double tau_p = state.last_entry[p];
    if (std::isnan(tau_p)) continue;  // delta = inf
    const double delta = now - tau_p;
    if (delta < model.beta / model.alpha[p]) {
      f[p] = model.beta - model.alpha[p] * delta;
    }
  }
  return f;
}

SampleSet build_samples(const DecayModel& model, const EventLog& log,
                        const std::vector<std::string>& vocabulary,
                        const SampleOptions& options) {
  SampleSet set;
  set.vocabulary = vocabulary;
  set.place_count = model.net.places.size();

  std::map<std::string, std::size_t> vocab_index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i)
    vocab_index[vocabulary[i]] = i;

  std::set<std::string> labels;
  for (std::size_t i = 0; i < log.traces.size(); ++i) {
    const auto& trace = log.traces[i];
    ReplayContext ctx(model.net, options.policy, i);
    DecayState state = DecayState::reset(model.net, vocabulary.size());

    auto emit = [&](double tau, const std::string& label, std::size_t j) {
      TimedStateSample sample;
      sample.features = decay_response(model, state, tau);
      sample.features.reserve(set.feature_width());
      for (long long c : state.token_counts)
        sample.features.push_back(static_cast<double>(c));
      for (int m : state.marking.tokens)
        sample.features.push_back(static_cast<double>(m));
      for (long long r : state.attribute_counts)
        sample.features.push_back(static_cast<double>(r));
      sample.label = label;
      sample.trace_id = trace.case_id;
      sample.instance_index = j;
      sample.tau = tau;
      labels.insert(label);
      set.samples.push_back(std::move(sample));
    };

    if (options.emit_initial_sample && !trace.instances.empty()) {
      emit(trace.instances.front().timestamp, trace.instances.front().event_name,
           0);
    }
    for (std::size_t j = 0; j < trace.instances.size(); ++j) {
      const auto& inst = trace.instances[j];
      auto step = ctx.step(inst, j);
      for (const auto& entry : step.entries) {
        state.last_entry[entry.place_index] = entry.time;
        ++state.token_counts[entry.place_index];
      }
      for (const auto& [name, value] : inst.attributes) {
        auto it = vocab_index.find(name + "=" + value);
        if (it != vocab_index.end()) ++state.attribute_counts[it->second];
      }
      state.marking = ctx.marking();
      if (j + 1 < trace.instances.size()) {
        emit(inst.timestamp, trace.instances[j + 1].event_name, j + 1);
      }
    }
  }
  set.label_alphabet.assign(labels.begin(), labels.end());
  return set;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void serialize_samples(const SampleSet& set, std::ostream& csv_sink,
                       std::ostream& sidecar_sink, const DecayModel& model) {
  const std::size_t np = set.place_count;
  const std::size_t nv = set.vocabulary.size();
  csv_sink << "trace_id,instance_idx,tau";
  for (std::size_t i = 0; i < np; ++i) csv_sink << ",F_" << i;
  for (std::size_t i = 0; i < np; ++i) csv_sink << ",C_" << i;
  for (std::size_t i = 0; i < np; ++i) csv_sink << ",M_" << i;
  for (std::size_t i = 0; i < nv; ++i) csv_sink << ",R_" << i;
  csv_sink << ",label\n";
  for (const auto& s : set.samples) {
    csv_sink << s.trace_id << "," << s.instance_index << ","
             << format_double(s.tau);
    for (double f : s.features) csv_sink << "," << format_double(f);
    csv_sink << "," << s.label << "\n";
  }

  nlohmann::ordered_json j;
  j["beta"] = model.beta;
  j["alpha"] = model.alpha;
  j["place_count"] = np;
  j["vocabulary"] = set.vocabulary;
  j["label_alphabet"] = set.label_alphabet;
  j["trained_on"] = model.trained_on;
  sidecar_sink << j.dump(2) << "\n";
}

SampleSet deserialize_samples(std::istream& csv_source,
                              std::istream& sidecar_source) {
  nlohmann::json sidecar;
  sidecar_source >> sidecar;
  SampleSet set;
  set.place_count = sidecar.at("place_count").get<std::size_t>();
  set.vocabulary = sidecar.at("vocabulary").get<std::vector<std::string>>();
  set.label_alphabet =
      sidecar.at("label_alphabet").get<std::vector<std::string>>();

  const std::size_t width = set.feature_width();
  std::string line;
  if (!std::getline(csv_source, line))
    throw ParseError("sample CSV: missing header");
  std::size_t row = 1;
  while (std::getline(csv_source, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != width + 4) {
      throw ParseError("sample CSV row " + std::to_string(row) +
                       ": expected " + std::to_string(width + 4) +
                       " fields, got " + std::to_string(fields.size()));
    }
    TimedStateSample s;
    s.trace_id = fields[0];
    s.instance_index = std::stoull(fields[1]);
    s.tau = std::stod(fields[2]);
    s.features.reserve(width);
    for (std::size_t i = 0; i < width; ++i)
      s.features.push_back(std::stod(fields[3 + i]));
    s.label = fields.back();
    set.samples.push_back(std::move(s));
  }
  return set;
}

void save_decay_model(const DecayModel& model, std::ostream& sink) {
  nlohmann::ordered_json j;
  j["beta"] = model.beta;
  j["alpha"] = model.alpha;
  j["trained_on"] = model.trained_on;
  std::ostringstream pnml;
  serialize_pnml(model.net, pnml);
  j["pnml"] = pnml.str();
  sink << j.dump(2) << "\n";
}

DecayModel load_decay_model(std::istream& source) {
  nlohmann::json j;
  source >> j;
  DecayModel model;
  model.beta = j.at("beta").get<double>();
  model.alpha = j.at("alpha").get<std::vector<double>>();
  model.trained_on = j.value("trained_on", "");
  std::istringstream pnml(j.at("pnml").get<std::string>());
  model.net = parse_pnml(pnml);
  if (model.alpha.size() != model.net.places.size())
    throw ParseError("decay model: alpha width does not match place count");
  return model;
}

}  // namespace dream
