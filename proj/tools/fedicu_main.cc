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

// fedicu: generate data, extract features, train centrally or federated,
// compare the four model/mode cells, and run a networked server or worker.
//
// Exit status: 0 on success, 2 on usage errors, 1 on any other failure.

#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedicu/data.h"
#include "fedicu/errors.h"
#include "fedicu/experiment.h"
#include "fedicu/features.h"
#include "fedicu/federation.h"
#include "fedicu/transport.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using fedicu::experiment::ConfigKey;
using fedicu::experiment::ExperimentConfig;
using fedicu::experiment::KeyType;
using nlohmann::json;

struct Flags {
  std::string config_path;
  std::map<std::string, std::string> raw;  // key -> flag text
};

std::string FlagName(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '_', '-');
  return "--" + out;
}

const char* TypeName(KeyType type) {
  switch (type) {
    case KeyType::kInt: return "UINT";
    case KeyType::kDouble: return "FLOAT";
    case KeyType::kBool: return "BOOL";
    case KeyType::kStringList: return "A,B,...";
    case KeyType::kString: break;
  }
  return "TEXT";
}

void AddConfigFlags(CLI::App& app, Flags& flags) {
  app.add_option("--config", flags.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  for (const ConfigKey& key : fedicu::experiment::ConfigKeys()) {
    const std::string name(key.name);
    app.add_option_function<std::string>(
        FlagName(key.name),
        [&flags, name](const std::string& v) { flags.raw[name] = v; },
        std::string(key.help))
        ->type_name(TypeName(key.type));
  }
}

json ConvertFlag(const ConfigKey& key, const std::string& text) {
  switch (key.type) {
    case KeyType::kInt: {
      std::uint64_t v = 0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
        throw fedicu::UsageError(FlagName(key.name) +
                                 " expects a non-negative integer, got '" +
                                 text + "'");
      }
      return v;
    }
    case KeyType::kDouble:
      try {
        return fedicu::data::ParseDouble(text);
      } catch (const std::exception&) {
        throw fedicu::UsageError(FlagName(key.name) +
                                 " expects a number, got '" + text + "'");
      }
    case KeyType::kBool:
      if (text == "true" || text == "1" || text == "on") return true;
      if (text == "false" || text == "0" || text == "off") return false;
      throw fedicu::UsageError(FlagName(key.name) +
                               " expects true or false, got '" + text + "'");
    case KeyType::kStringList: {
      json list = json::array();
      std::size_t start = 0;
      while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::size_t end = comma == std::string::npos ? text.size() : comma;
        if (end > start) list.push_back(text.substr(start, end - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return list;
    }
    case KeyType::kString:
      break;
  }
  return text;
}

// Config file first, then command-line flags on top.
json MergedJson(const Flags& flags) {
  json j = flags.config_path.empty()
               ? json::object()
               : fedicu::experiment::LoadConfigFile(flags.config_path);
  if (!j.is_object()) throw fedicu::UsageError("config must be a JSON object");
  for (const auto& [name, text] : flags.raw) {
    for (const ConfigKey& key : fedicu::experiment::ConfigKeys()) {
      if (key.name == name) j[name] = ConvertFlag(key, text);
    }
  }
  return j;
}

fs::path OutDir(const ExperimentConfig& cfg) {
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  return out;
}

std::size_t InputDim(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.variables.empty() ? cfg.synthetic.n_variables
                                              : cfg.variables.size();
  return n * fedicu::features::kFeaturesPerVariable;
}

int CmdGenerate(const ExperimentConfig& cfg) {
  if (cfg.data_dir) {
    throw fedicu::UsageError("generate takes synthetic-generator keys, not "
                             "--data-dir");
  }
  fedicu::data::SyntheticConfig synthetic = cfg.synthetic;
  synthetic.seed = cfg.seeds().data;
  const auto episodes = fedicu::data::Generate(synthetic);
  const fs::path out = OutDir(cfg);
  fedicu::data::SaveEpisodes(episodes, out / "measurements.csv",
                             out / "labels.csv");
  std::size_t positives = 0;
  for (const auto& e : episodes) positives += e.label;
  std::cout << "wrote " << episodes.size() << " episodes (" << positives
            << " positive) to " << out.string() << "\n";
  return 0;
}

fedicu::features::FeatureMatrix SubsetRows(
    const fedicu::features::FeatureMatrix& fm, const fedicu::Matrix& index) {
  fedicu::features::FeatureMatrix out;
  out.num_variables = fm.num_variables;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < index.rows(); ++r) {
    rows.push_back(static_cast<std::size_t>(index(r, 0)));
  }
  out.rows = fm.rows.SelectRows(rows);
  for (std::size_t r : rows) {
    out.episode_ids.push_back(fm.episode_ids[r]);
    out.labels.push_back(fm.labels[r]);
  }
  return out;
}

// Row-index samples; partitioning them tells which feature rows each
// hospital receives, exactly as the in-process experiment splits them.
fedicu::Samples IndexSamples(const fedicu::features::FeatureMatrix& fm) {
  fedicu::Samples s;
  for (std::size_t r = 0; r < fm.rows.rows(); ++r) {
    const double idx = static_cast<double>(r);
    s.x.AppendRow(std::span<const double>(&idx, 1));
    s.y.push_back(fm.labels[r]);
  }
  return s;
}

int CmdExtract(const ExperimentConfig& cfg, bool per_hospital) {
  const auto prepared = fedicu::experiment::PrepareData(cfg);
  const auto names = fedicu::features::FeatureNames(prepared.variables);
  const fs::path out = OutDir(cfg);
  fedicu::data::SaveFeatureCsv(prepared.train, names, out / "features_train.csv");
  fedicu::data::SaveFeatureCsv(prepared.test, names, out / "features_test.csv");
  std::cout << "wrote " << prepared.train.rows.rows() << " train and "
            << prepared.test.rows.rows() << " test rows of width "
            << names.size() << " to " << out.string() << "\n";
  if (!per_hospital) return 0;

  const fedicu::data::PartitionPlan plan{cfg.partition, cfg.fed.num_hospitals,
                                         cfg.skew_alpha, cfg.seeds().partition};
  const auto shards = fedicu::data::Partition(IndexSamples(prepared.train),
                                              IndexSamples(prepared.test), plan);
  for (const auto& shard : shards) {
    const fs::path dir = out / ("hospital_" + std::to_string(shard.hospital_id));
    fs::create_directories(dir);
    fedicu::data::SaveFeatureCsv(SubsetRows(prepared.train, shard.train.x),
                                 names, dir / "train.csv");
    fedicu::data::SaveFeatureCsv(SubsetRows(prepared.test, shard.test.x), names,
                                 dir / "test.csv");
    std::cout << "hospital " << shard.hospital_id << ": " << shard.train.size()
              << " train, " << shard.test.size() << " test -> " << dir.string()
              << "\n";
  }
  return 0;
}

int CmdTrain(const ExperimentConfig& cfg) {
  const auto report = fedicu::experiment::RunExperiment(cfg);
  const fs::path path = OutDir(cfg) / "report.json";
  fedicu::experiment::WriteJson(report.json, path);
  std::printf("%s AUROC %.4f AUPRC %.4f accuracy %.4f (n=%zu)\n",
              report.json["cell"].get<std::string>().c_str(),
              report.metrics.auroc, report.metrics.auprc,
              report.metrics.accuracy, report.metrics.n);
  std::cout << "report: " << path.string() << "\n";
  return 0;
}

int CmdCompare(const ExperimentConfig& cfg) {
  const auto comparison = fedicu::experiment::RunComparison(cfg);
  const fs::path path = OutDir(cfg) / "compare.json";
  fedicu::experiment::WriteJson(comparison.json, path);
  std::cout << fedicu::experiment::RenderTable(comparison);
  std::cout << "report: " << path.string() << "\n";
  return 0;
}

int CmdServe(const ExperimentConfig& cfg) {
  const auto addr = fedicu::transport::ParseHostPort(cfg.listen);
  const auto arch = cfg.Arch(InputDim(cfg));
  auto initial = fedicu::model::InitParams(arch, cfg.seeds().init);
  const auto fed = cfg.FedWithSeed();

  fedicu::transport::TcpListener listener(addr);
  std::cerr << "listening on " << addr.host << ":" << listener.port()
            << ", waiting for " << fed.num_hospitals << " hospitals\n";
  auto hospitals = fedicu::federation::AcceptHospitals(
      listener, fed.num_hospitals,
      std::chrono::seconds(cfg.accept_timeout_s),
      [](const std::exception& e) {
        std::cerr << "rejected worker: " << e.what() << "\n";
      });
  for (const auto& h : hospitals) {
    std::cerr << "hospital " << h.hospital_id << " registered (" << h.n_train
              << " train, " << h.n_test << " test)\n";
  }

  const auto state = fedicu::federation::RunFederation(
      hospitals, arch, std::move(initial), fed,
      [](const fedicu::federation::RoundRecord& rec,
         const fedicu::model::ParameterVector&) {
        std::fprintf(stderr, "round %u: %s %.4f (best %.4f)\n", rec.round,
                     rec.committed ? "commit" : "revert", rec.candidate_metric,
                     rec.best_metric);
      });

  json registered = json::array();
  for (const auto& h : hospitals) {
    registered.push_back({{"id", h.hospital_id},
                          {"n_train", h.n_train},
                          {"n_test", h.n_test}});
  }
  const json report = {
      {"schema", "fedicu.serve_report"},
      {"schema_version", fedicu::experiment::kReportSchemaVersion},
      {"generated_at", fedicu::experiment::UtcTimestamp()},
      {"cell", fedicu::experiment::CellLabel(cfg.model,
                                             fedicu::experiment::Mode::kFederated)},
      {"config", cfg.ToJson()},
      {"hospitals", registered},
      {"best_metric", state.best_accuracy},
      {"gate_metric", fedicu::federation::ToString(fed.gate_metric)},
      {"parameters",
       {{"count", state.global_params.size()},
        {"digest", fedicu::experiment::ParamsDigest(state.global_params)},
        {"values", state.global_params.values}}},
      {"history", fedicu::experiment::HistoryToJson(state.history)},
  };
  const fs::path path = OutDir(cfg) / "report.json";
  fedicu::experiment::WriteJson(report, path);
  std::printf("finished %zu rounds, best %s %.4f\n", state.history.size(),
              std::string(fedicu::federation::ToString(fed.gate_metric)).c_str(),
              state.best_accuracy);
  std::cout << "report: " << path.string() << "\n";
  return 0;
}

int CmdWorker(const ExperimentConfig& cfg) {
  if (cfg.shard.empty()) throw fedicu::UsageError("worker requires --shard");
  if (cfg.hospital_id == 0) throw fedicu::UsageError("--id must be at least 1");
  const fs::path dir(cfg.shard);
  const auto train = fedicu::data::LoadFeatureCsv(dir / "train.csv");
  const auto test = fedicu::data::LoadFeatureCsv(dir / "test.csv");
  if (train.rows.cols() != test.rows.cols()) {
    throw fedicu::DimensionError("shard train and test widths differ");
  }
  fedicu::HospitalDataset hospital{cfg.hospital_id, train.ToSamples(),
                                   test.ToSamples()};
  const auto scaler = fedicu::features::Scaler::Fit(hospital.train.x);
  scaler.TransformInPlace(hospital.train.x);
  scaler.TransformInPlace(hospital.test.x);

  fedicu::federation::WorkerConfig worker{cfg.Arch(train.rows.cols()),
                                          cfg.TrainWithSeed(),
                                          cfg.fed.gate_metric};
  worker.train.epochs = cfg.fed.local_epochs;

  auto conn = fedicu::transport::TcpConnect(
      fedicu::transport::ParseHostPort(cfg.connect),
      std::chrono::seconds(cfg.accept_timeout_s));
  std::cerr << "hospital " << cfg.hospital_id << " connected to "
            << cfg.connect << "\n";
  fedicu::federation::ServeHospital(*conn, hospital, worker);
  std::cout << "hospital " << cfg.hospital_id << " done\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated ICU mortality prediction"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    Flags flags;
  };
  std::map<std::string, Command> commands;
  const std::pair<const char*, const char*> specs[] = {
      {"generate", "write a synthetic episode dataset"},
      {"extract", "write feature CSVs (and per-hospital shards)"},
      {"train", "train one model centrally or federated"},
      {"compare", "run LR/MLP x centralized/federated"},
      {"serve", "run the federation server over TCP"},
      {"worker", "run one hospital over TCP"},
  };
  for (const auto& [name, help] : specs) {
    Command& cmd = commands[name];
    cmd.app = app.add_subcommand(name, help);
    AddConfigFlags(*cmd.app, cmd.flags);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  std::string stage = "config";
  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      const json merged = MergedJson(cmd.flags);
      const ExperimentConfig cfg = ExperimentConfig::FromJson(merged);
      stage = name;
      if (name == "generate") return CmdGenerate(cfg);
      if (name == "extract") return CmdExtract(cfg, merged.contains("hospitals"));
      if (name == "train") return CmdTrain(cfg);
      if (name == "compare") return CmdCompare(cfg);
      if (name == "serve") return CmdServe(cfg);
      if (name == "worker") return CmdWorker(cfg);
    }
  } catch (const fedicu::UsageError& e) {
    std::cerr << "fedicu " << stage << ": usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fedicu " << stage << ": error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
