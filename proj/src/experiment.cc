/*
 * Copyright 2026 The fedicu Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedicu/experiment.h"

#include <array>
#include <bit>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "fedicu/errors.h"
#include "fedicu/random.h"

namespace fedicu::experiment {

namespace {

using nlohmann::json;

constexpr ConfigKey kKeys[] = {
    {"data_dir", KeyType::kString,
     "directory holding measurements.csv and labels.csv"},
    {"episodes", KeyType::kInt, "synthetic episodes to generate", true},
    {"n_variables", KeyType::kInt, "synthetic variables per episode", true},
    {"prevalence", KeyType::kDouble, "synthetic positive fraction", true},
    {"effect_size", KeyType::kDouble,
     "synthetic mean shift of positives (noise stds)", true},
    {"min_points", KeyType::kInt, "synthetic min measurements per variable",
     true},
    {"max_points", KeyType::kInt, "synthetic max measurements per variable",
     true},
    {"variables", KeyType::kStringList,
     "comma-separated variables to featurize (default: all)"},
    {"test_fraction", KeyType::kDouble, "stratified test fraction"},
    {"model", KeyType::kString, "lr or mlp"},
    {"hidden", KeyType::kInt, "MLP hidden width"},
    {"activation", KeyType::kString, "MLP hidden activation: relu or tanh"},
    {"batch_size", KeyType::kInt, "mini-batch size"},
    {"epochs", KeyType::kInt, "centralized training epochs"},
    {"learning_rate", KeyType::kDouble, "Adam learning rate"},
    {"beta1", KeyType::kDouble, "Adam beta1"},
    {"beta2", KeyType::kDouble, "Adam beta2"},
    {"epsilon", KeyType::kDouble, "Adam epsilon"},
    {"shuffle", KeyType::kBool, "shuffle rows every epoch"},
    {"mode", KeyType::kString, "central or federated"},
    {"hospitals", KeyType::kInt, "number of hospitals K"},
    {"rounds", KeyType::kInt, "federation rounds"},
    {"local_epochs", KeyType::kInt, "local epochs per round"},
    {"cohort_fraction", KeyType::kDouble, "fraction of hospitals per round"},
    {"gate", KeyType::kBool, "reject candidates that score worse"},
    {"gate_metric", KeyType::kString, "accuracy or auroc"},
    {"partition", KeyType::kString, "equal_iid or label_skew"},
    {"skew_alpha", KeyType::kDouble, "Dirichlet concentration for label_skew"},
    {"transport", KeyType::kString,
     "simulation transport: inprocess or tcp"},
    {"seed", KeyType::kInt, "master seed"},
    {"out", KeyType::kString, "output directory"},
    {"listen", KeyType::kString, "serve: HOST:PORT to listen on"},
    {"connect", KeyType::kString, "worker: HOST:PORT of the server"},
    {"shard", KeyType::kString, "worker: directory with train.csv/test.csv"},
    {"id", KeyType::kInt, "worker: hospital id"},
    {"accept_timeout", KeyType::kInt,
     "serve: seconds to wait for each worker connection"},
};

void CheckType(const ConfigKey& key, const json& value) {
  bool ok = false;
  switch (key.type) {
    case KeyType::kInt:
      ok = value.is_number_integer() && value.get<std::int64_t>() >= 0;
      break;
    case KeyType::kDouble:
      ok = value.is_number();
      break;
    case KeyType::kString:
      ok = value.is_string();
      break;
    case KeyType::kBool:
      ok = value.is_boolean();
      break;
    case KeyType::kStringList:
      ok = value.is_array() &&
           std::all_of(value.begin(), value.end(),
                       [](const json& v) { return v.is_string(); });
      break;
  }
  if (!ok) {
    throw UsageError("config key '" + std::string(key.name) +
                     "' has the wrong type: " + value.dump());
  }
}

std::size_t Count(const json& v) { return v.get<std::size_t>(); }

const char* TransportName(federation::SimulatedTransport t) {
  return t == federation::SimulatedTransport::kInProcess ? "inprocess" : "tcp";
}

json EvalToJson(const metrics::EvalResult& r) {
  return {{"auroc", r.auroc}, {"auprc", r.auprc}, {"accuracy", r.accuracy},
          {"n", r.n}};
}

json SeedsToJson(const Seeds& s) {
  return {{"master", s.master},       {"data", s.data},
          {"split", s.split},         {"partition", s.partition},
          {"init", s.init},           {"train", s.train},
          {"cohort", s.cohort}};
}

Samples Concatenate(std::span<const Samples> parts) {
  Samples out;
  for (const Samples& part : parts) {
    for (std::size_t r = 0; r < part.size(); ++r) {
      out.x.AppendRow(part.x.row(r));
      out.y.push_back(part.y[r]);
    }
  }
  return out;
}

metrics::EvalResult EvaluateOn(const model::ModelArch& arch,
                               const model::ParameterVector& params,
                               const Samples& samples) {
  const std::vector<double> scores = model::Predict(arch, params, samples.x);
  return metrics::Evaluate(scores, samples.y);
}

double Prevalence(std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1;
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

}  // namespace

std::string_view ToString(Mode mode) {
  return mode == Mode::kCentral ? "central" : "federated";
}

Mode ParseMode(std::string_view name) {
  if (name == "central") return Mode::kCentral;
  if (name == "federated") return Mode::kFederated;
  throw UsageError("unknown mode '" + std::string(name) +
                   "'; valid values: central, federated");
}

std::span<const ConfigKey> ConfigKeys() { return kKeys; }

Seeds Seeds::From(std::uint64_t master) {
  return Seeds{master,
               DeriveSeed(master, 1),
               DeriveSeed(master, 2),
               DeriveSeed(master, 3),
               DeriveSeed(master, 4),
               DeriveSeed(master, 5),
               DeriveSeed(master, 6)};
}

ExperimentConfig ExperimentConfig::FromJson(const json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  ExperimentConfig c;
  bool synthetic_keys = false;
  for (const auto& [name, value] : j.items()) {
    const auto it = std::find_if(std::begin(kKeys), std::end(kKeys),
                                 [&](const ConfigKey& k) { return k.name == name; });
    if (it == std::end(kKeys)) {
      throw UsageError("unknown config key '" + name + "'");
    }
    CheckType(*it, value);
    synthetic_keys |= it->synthetic_source;

    if (name == "data_dir") c.data_dir = value.get<std::string>();
    else if (name == "episodes") c.synthetic.n_episodes = Count(value);
    else if (name == "n_variables") c.synthetic.n_variables = Count(value);
    else if (name == "prevalence") c.synthetic.prevalence = value.get<double>();
    else if (name == "effect_size") c.synthetic.effect_size = value.get<double>();
    else if (name == "min_points") c.synthetic.min_points = Count(value);
    else if (name == "max_points") c.synthetic.max_points = Count(value);
    else if (name == "variables") c.variables = value.get<std::vector<std::string>>();
    else if (name == "test_fraction") c.test_fraction = value.get<double>();
    else if (name == "model") c.model = model::ParseModelKind(value.get<std::string>());
    else if (name == "hidden") c.hidden = Count(value);
    else if (name == "activation") c.activation = model::ParseActivation(value.get<std::string>());
    else if (name == "batch_size") c.train.batch_size = Count(value);
    else if (name == "epochs") c.train.epochs = Count(value);
    else if (name == "learning_rate") c.train.adam.learning_rate = value.get<double>();
    else if (name == "beta1") c.train.adam.beta1 = value.get<double>();
    else if (name == "beta2") c.train.adam.beta2 = value.get<double>();
    else if (name == "epsilon") c.train.adam.epsilon = value.get<double>();
    else if (name == "shuffle") c.train.shuffle = value.get<bool>();
    else if (name == "mode") c.mode = ParseMode(value.get<std::string>());
    else if (name == "hospitals") c.fed.num_hospitals = Count(value);
    else if (name == "rounds") c.fed.rounds = Count(value);
    else if (name == "local_epochs") c.fed.local_epochs = Count(value);
    else if (name == "cohort_fraction") c.fed.cohort_fraction = value.get<double>();
    else if (name == "gate") c.fed.gate_enabled = value.get<bool>();
    else if (name == "gate_metric") c.fed.gate_metric = federation::ParseGateMetric(value.get<std::string>());
    else if (name == "partition") c.partition = data::ParsePartitionStrategy(value.get<std::string>());
    else if (name == "skew_alpha") c.skew_alpha = value.get<double>();
    else if (name == "transport") {
      const auto t = value.get<std::string>();
      if (t == "inprocess") c.transport = federation::SimulatedTransport::kInProcess;
      else if (t == "tcp") c.transport = federation::SimulatedTransport::kTcpLoopback;
      else throw UsageError("unknown transport '" + t + "'; valid values: inprocess, tcp");
    }
    else if (name == "seed") c.seed = value.get<std::uint64_t>();
    else if (name == "out") c.out_dir = value.get<std::string>();
    else if (name == "listen") c.listen = value.get<std::string>();
    else if (name == "connect") c.connect = value.get<std::string>();
    else if (name == "shard") c.shard = value.get<std::string>();
    else if (name == "id") c.hospital_id = static_cast<std::uint32_t>(Count(value));
    else if (name == "accept_timeout") c.accept_timeout_s = Count(value);
  }
  if (c.data_dir && synthetic_keys) {
    throw UsageError(
        "both data_dir and synthetic-generator keys are set; choose one data "
        "source");
  }
  if (c.model == model::ModelKind::kMlp && c.hidden == 0) {
    throw UsageError("hidden must be at least 1");
  }
  if (c.train.batch_size == 0) throw UsageError("batch_size must be positive");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) {
    throw UsageError("test_fraction must lie strictly between 0 and 1");
  }
  c.fed.Validate();
  return c;
}

json ExperimentConfig::ToJson() const {
  json j = {
      {"variables", variables},
      {"test_fraction", test_fraction},
      {"model", model::ToString(model)},
      {"hidden", hidden},
      {"activation", model::ToString(activation)},
      {"batch_size", train.batch_size},
      {"epochs", train.epochs},
      {"learning_rate", train.adam.learning_rate},
      {"beta1", train.adam.beta1},
      {"beta2", train.adam.beta2},
      {"epsilon", train.adam.epsilon},
      {"shuffle", train.shuffle},
      {"mode", ToString(mode)},
      {"hospitals", fed.num_hospitals},
      {"rounds", fed.rounds},
      {"local_epochs", fed.local_epochs},
      {"cohort_fraction", fed.cohort_fraction},
      {"gate", fed.gate_enabled},
      {"gate_metric", federation::ToString(fed.gate_metric)},
      {"partition", data::ToString(partition)},
      {"skew_alpha", skew_alpha},
      {"transport", TransportName(transport)},
      {"seed", seed},
      {"out", out_dir},
  };
  if (data_dir) {
    j["data_dir"] = *data_dir;
  } else {
    j["episodes"] = synthetic.n_episodes;
    j["n_variables"] = synthetic.n_variables;
    j["prevalence"] = synthetic.prevalence;
    j["effect_size"] = synthetic.effect_size;
    j["min_points"] = synthetic.min_points;
    j["max_points"] = synthetic.max_points;
  }
  return j;
}

model::ModelArch ExperimentConfig::Arch(std::size_t input_dim) const {
  return model == model::ModelKind::kLogistic
             ? model::ModelArch::Logistic(input_dim)
             : model::ModelArch::Mlp(input_dim, hidden, activation);
}

model::TrainConfig ExperimentConfig::TrainWithSeed() const {
  model::TrainConfig t = train;
  t.seed = seeds().train;
  return t;
}

federation::FedConfig ExperimentConfig::FedWithSeed() const {
  federation::FedConfig f = fed;
  f.seed = seeds().cohort;
  return f;
}

json LoadConfigFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file '" + path.string() + "': " + e.what());
  }
}

PreparedData PrepareData(const ExperimentConfig& cfg) {
  const Seeds seeds = cfg.seeds();
  std::vector<features::Episode> episodes;
  if (cfg.data_dir) {
    const std::filesystem::path dir(*cfg.data_dir);
    episodes = data::LoadEpisodes(dir / "measurements.csv", dir / "labels.csv");
  } else {
    data::SyntheticConfig synthetic = cfg.synthetic;
    synthetic.seed = seeds.data;
    episodes = data::Generate(synthetic);
  }
  PreparedData out;
  out.variables =
      cfg.variables.empty() ? data::CollectVariables(episodes) : cfg.variables;
  const data::EpisodeSplit split =
      data::SplitTrainTest(episodes, cfg.test_fraction, seeds.split);
  out.train = features::Extract(split.train, out.variables);
  out.test = features::Extract(split.test, out.variables);
  return out;
}

std::vector<HospitalDataset> BuildHospitals(const ExperimentConfig& cfg,
                                            const PreparedData& prepared) {
  data::PartitionPlan plan{cfg.partition, cfg.fed.num_hospitals, cfg.skew_alpha,
                           cfg.seeds().partition};
  std::vector<HospitalDataset> hospitals = data::Partition(
      prepared.train.ToSamples(), prepared.test.ToSamples(), plan);
  for (HospitalDataset& h : hospitals) {
    const features::Scaler scaler = features::Scaler::Fit(h.train.x);
    scaler.TransformInPlace(h.train.x);
    scaler.TransformInPlace(h.test.x);
  }
  return hospitals;
}

std::string CellLabel(model::ModelKind model, Mode mode) {
  return std::string(model == model::ModelKind::kLogistic ? "LR" : "MLP") +
         (mode == Mode::kCentral ? "-ORG" : "-FL");
}

Report RunExperiment(const ExperimentConfig& cfg) {
  return RunPrepared(cfg, PrepareData(cfg));
}

Report RunPrepared(const ExperimentConfig& cfg, const PreparedData& prepared) {
  const Seeds seeds = cfg.seeds();
  const model::ModelArch arch = cfg.Arch(prepared.train.rows.cols());
  model::ParameterVector initial = model::InitParams(arch, seeds.init);

  Report report;
  json history = json::array();
  std::size_t n_train = prepared.train.rows.rows();
  std::size_t n_test = prepared.test.rows.rows();

  if (cfg.mode == Mode::kCentral) {
    const features::Scaler scaler = features::Scaler::Fit(prepared.train.rows);
    Samples train{scaler.Transform(prepared.train.rows), prepared.train.labels};
    Samples test{scaler.Transform(prepared.test.rows), prepared.test.labels};
    report.final_params =
        model::Train(arch, std::move(initial), train, cfg.TrainWithSeed());
    report.metrics = EvaluateOn(arch, report.final_params, test);
  } else {
    const std::vector<HospitalDataset> hospitals =
        BuildHospitals(cfg, prepared);
    std::vector<Samples> tests;
    for (const auto& h : hospitals) tests.push_back(h.test);
    const Samples pooled_test = Concatenate(tests);

    std::vector<metrics::EvalResult> per_round;
    const federation::RoundObserver observer =
        [&](const federation::RoundRecord&,
            const model::ParameterVector& global) {
          per_round.push_back(EvaluateOn(arch, global, pooled_test));
        };
    const federation::FederationState state = federation::RunSimulation(
        hospitals, arch, std::move(initial), cfg.FedWithSeed(),
        cfg.TrainWithSeed(), cfg.transport, observer);
    report.final_params = state.global_params;
    report.metrics = EvaluateOn(arch, report.final_params, pooled_test);
    history = HistoryToJson(state.history);
    for (std::size_t r = 0; r < history.size(); ++r) {
      history[r]["test"] = EvalToJson(per_round[r]);
    }
  }

  report.json = {
      {"schema", "fedicu.report"},
      {"schema_version", kReportSchemaVersion},
      {"generated_at", UtcTimestamp()},
      {"cell", CellLabel(cfg.model, cfg.mode)},
      {"model", model::ToString(cfg.model)},
      {"mode", ToString(cfg.mode)},
      {"metrics", EvalToJson(report.metrics)},
      {"config", cfg.ToJson()},
      {"seeds", SeedsToJson(seeds)},
      {"dataset",
       {{"variables", prepared.variables},
        {"n_features", prepared.train.rows.cols()},
        {"n_train", n_train},
        {"n_test", n_test},
        {"train_prevalence", Prevalence(prepared.train.labels)},
        {"test_prevalence", Prevalence(prepared.test.labels)}}},
      {"parameters",
       {{"count", report.final_params.size()},
        {"digest", ParamsDigest(report.final_params)}}},
      {"history", history},
  };
  return report;
}

Comparison RunComparison(const ExperimentConfig& cfg) {
  const PreparedData prepared = PrepareData(cfg);
  Comparison out;
  json cells = json::object();
  for (const auto kind : {model::ModelKind::kLogistic, model::ModelKind::kMlp}) {
    for (const auto mode : {Mode::kCentral, Mode::kFederated}) {
      ExperimentConfig cell = cfg;
      cell.model = kind;
      cell.mode = mode;
      const Report report = RunPrepared(cell, prepared);
      const std::string label = CellLabel(kind, mode);
      out.labels.push_back(label);
      out.results.push_back(report.metrics);
      cells[label] = {{"metrics", EvalToJson(report.metrics)},
                      {"parameters", report.json["parameters"]}};
    }
  }
  out.json = {{"schema", "fedicu.compare"},
              {"schema_version", kReportSchemaVersion},
              {"generated_at", UtcTimestamp()},
              {"config", cfg.ToJson()},
              {"seeds", SeedsToJson(cfg.seeds())},
              {"cells", cells}};
  return out;
}

std::string RenderTable(const Comparison& comparison) {
  std::ostringstream out;
  char buf[64];
  out << "       ";
  for (const auto& label : comparison.labels) {
    std::snprintf(buf, sizeof(buf), " %9s", label.c_str());
    out << buf;
  }
  out << '\n';
  auto row = [&](const char* name, double metrics::EvalResult::*field) {
    std::snprintf(buf, sizeof(buf), "%-7s", name);
    out << buf;
    for (const auto& r : comparison.results) {
      std::snprintf(buf, sizeof(buf), " %9.4f", r.*field);
      out << buf;
    }
    out << '\n';
  };
  row("AUROC", &metrics::EvalResult::auroc);
  row("AUPRC", &metrics::EvalResult::auprc);
  return out.str();
}

std::string ParamsDigest(const model::ParameterVector& params) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (double v : params.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      hash ^= (bits >> (8 * i)) & 0xFF;
      hash *= 0x100000001B3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

json HistoryToJson(const std::vector<federation::RoundRecord>& history) {
  json out = json::array();
  for (const auto& rec : history) {
    out.push_back({{"round", rec.round},
                   {"cohort", rec.cohort},
                   {"weights", rec.weights},
                   {"hospital_metrics", rec.hospital_metrics},
                   {"candidate_metric", rec.candidate_metric},
                   {"committed", rec.committed},
                   {"best_metric", rec.best_metric},
                   {"bytes_sent", rec.bytes_sent},
                   {"bytes_received", rec.bytes_received}});
  }
  return out;
}

void WriteJson(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace fedicu::experiment
