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

#include "fedicu/data.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "fedicu/random.h"

namespace fedicu::data {

namespace {

struct VariableProfile {
  const char* name;
  double baseline;
  double noise_std;
};

constexpr VariableProfile kProfiles[] = {
    {"heart_rate", 85.0, 15.0},        {"systolic_bp", 120.0, 18.0},
    {"diastolic_bp", 65.0, 12.0},      {"respiratory_rate", 19.0, 5.0},
    {"temperature", 37.0, 0.7},        {"oxygen_saturation", 96.0, 2.5},
    {"glucose", 140.0, 40.0},
};
constexpr std::size_t kNumProfiles = std::size(kProfiles);

VariableProfile ProfileFor(std::size_t k) {
  if (k < kNumProfiles) return kProfiles[k];
  // Extra variables reuse the unit scale.
  return {nullptr, 0.0, 1.0};
}

std::vector<std::string_view> SplitCsvLine(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view StripCr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

void ExpectHeader(std::istream& in, std::string_view expected,
                  const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || StripCr(line) != expected) {
    throw DataError(path.filename().string() + ": expected header '" +
                        std::string(expected) + "'",
                    1);
  }
}

void CheckId(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos) {
    throw DataError("episode id '" + id + "' is empty or contains a separator");
  }
}

int ParseLabel(std::string_view text, std::size_t line) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw DataError("label must be 0 or 1, got '" + std::string(text) + "'",
                  line);
}

double GammaSample(RandomEngine& rng, double shape) {
  if (shape < 1.0) {
    double u;
    do {
      u = UniformUnit(rng);
    } while (u <= 0.0);
    return GammaSample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = StandardNormal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = UniformUnit(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

std::vector<double> DirichletSample(RandomEngine& rng, std::size_t k,
                                    double alpha) {
  std::vector<double> p(k);
  double total = 0.0;
  for (double& x : p) {
    x = GammaSample(rng, alpha);
    total += x;
  }
  if (total <= 0.0) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(k));
    return p;
  }
  for (double& x : p) x /= total;
  return p;
}

// Largest-remainder apportionment of n items by proportions p.
std::vector<std::size_t> Apportion(std::size_t n, std::span<const double> p) {
  std::vector<std::size_t> counts(p.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double exact = p[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - static_cast<double>(counts[k]), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    ++counts[remainders[i % remainders.size()].second];
  }
  return counts;
}

std::vector<std::size_t> ClassIndices(std::span<const int> labels, int cls) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cls) out.push_back(i);
  }
  return out;
}

constexpr int kMaxSkewAttempts = 1000;

using ClassProportions = std::array<std::vector<double>, 2>;

ClassProportions DrawProportions(const PartitionPlan& plan, int attempt) {
  RandomEngine rng(DeriveSeed(plan.seed, 0x5EED0000ULL + attempt));
  return {DirichletSample(rng, plan.num_hospitals, plan.skew_alpha),
          DirichletSample(rng, plan.num_hospitals, plan.skew_alpha)};
}

std::vector<std::vector<std::size_t>> AssignByProportions(
    std::span<const int> labels, const ClassProportions& props,
    std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> shards(props[0].size());
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members = ClassIndices(labels, cls);
    RandomEngine rng(DeriveSeed(seed, 0xC1A55ULL + cls));
    Shuffle(std::span<std::size_t>(members), rng);
    const auto counts = Apportion(members.size(), props[cls]);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < shards.size(); ++k) {
      shards[k].insert(shards[k].end(), members.begin() + offset,
                       members.begin() + offset + counts[k]);
      offset += counts[k];
    }
  }
  for (auto& shard : shards) std::sort(shard.begin(), shard.end());
  return shards;
}

bool AllNonEmpty(const std::vector<std::vector<std::size_t>>& shards) {
  return std::none_of(shards.begin(), shards.end(),
                      [](const auto& s) { return s.empty(); });
}

void CheckPlan(const PartitionPlan& plan, std::size_t rows, const char* side) {
  if (plan.num_hospitals == 0) {
    throw UsageError("partition needs at least one hospital");
  }
  if (plan.num_hospitals > rows) {
    throw DimensionError("cannot split " + std::to_string(rows) + " " + side +
                         " rows across " + std::to_string(plan.num_hospitals) +
                         " hospitals");
  }
  if (plan.strategy == PartitionStrategy::kLabelSkew &&
      !(plan.skew_alpha > 0.0)) {
    throw UsageError("skew_alpha must be positive");
  }
}

std::vector<std::vector<std::size_t>> EqualIid(std::size_t n,
                                               std::size_t k,
                                               std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomEngine rng(seed);
  Shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> shards(k);
  std::size_t offset = 0;
  for (std::size_t h = 0; h < k; ++h) {
    const std::size_t len = n / k + (h < n % k ? 1 : 0);
    shards[h].assign(order.begin() + offset, order.begin() + offset + len);
    std::sort(shards[h].begin(), shards[h].end());
    offset += len;
  }
  return shards;
}

}  // namespace

std::vector<std::string> VariableNames(std::size_t n_variables) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n_variables; ++k) {
    names.push_back(k < kNumProfiles ? std::string(kProfiles[k].name)
                                     : "var" + std::to_string(k + 1));
  }
  return names;
}

std::vector<Episode> Generate(const SyntheticConfig& cfg) {
  if (cfg.n_episodes < 2) throw UsageError("need at least two episodes");
  if (cfg.n_variables == 0) throw UsageError("need at least one variable");
  if (!(cfg.prevalence > 0.0 && cfg.prevalence < 1.0)) {
    throw UsageError("prevalence must lie in (0, 1)");
  }
  if (cfg.min_points == 0 || cfg.min_points > cfg.max_points) {
    throw UsageError("points-per-variable range must satisfy 1 <= min <= max");
  }
  const auto n_pos = static_cast<std::size_t>(
      std::llround(cfg.prevalence * static_cast<double>(cfg.n_episodes)));
  if (n_pos == 0 || n_pos == cfg.n_episodes) {
    throw UsageError("prevalence " + FormatDouble(cfg.prevalence) + " with " +
                     std::to_string(cfg.n_episodes) +
                     " episodes leaves one class empty");
  }

  std::vector<std::size_t> order(cfg.n_episodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomEngine label_rng(DeriveSeed(cfg.seed, 1));
  Shuffle(std::span<std::size_t>(order), label_rng);
  std::vector<int> labels(cfg.n_episodes, 0);
  for (std::size_t i = 0; i < n_pos; ++i) labels[order[i]] = 1;

  const std::vector<std::string> names = VariableNames(cfg.n_variables);
  std::vector<Episode> episodes;
  episodes.reserve(cfg.n_episodes);
  for (std::size_t e = 0; e < cfg.n_episodes; ++e) {
    RandomEngine rng(DeriveSeed(cfg.seed, 1000 + e));
    Episode ep;
    char id[32];
    std::snprintf(id, sizeof(id), "ep%06zu", e);
    ep.episode_id = id;
    ep.label = labels[e];
    for (std::size_t k = 0; k < cfg.n_variables; ++k) {
      const VariableProfile profile = ProfileFor(k);
      const double shift = ep.label == 1 ? cfg.effect_size * profile.noise_std
                                         : 0.0;
      const double offset = profile.noise_std * StandardNormal(rng);
      const std::size_t count =
          cfg.min_points +
          UniformIndex(rng, cfg.max_points - cfg.min_points + 1);
      features::Series series(count);
      for (auto& m : series) {
        m.hour = UniformReal(rng, 0.0, features::kHorizonHours);
        m.value = profile.baseline + shift + offset +
                  profile.noise_std * StandardNormal(rng);
      }
      std::sort(series.begin(), series.end(),
                [](const auto& a, const auto& b) { return a.hour < b.hour; });
      ep.series.emplace(names[k], std::move(series));
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

std::vector<std::string> CollectVariables(std::span<const Episode> episodes) {
  std::set<std::string> names;
  for (const Episode& ep : episodes) {
    for (const auto& [name, series] : ep.series) names.insert(name);
  }
  return {names.begin(), names.end()};
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

double ParseDouble(std::string_view text) {
  double v = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), v);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size() ||
      text.empty()) {
    throw DataError("'" + std::string(text) + "' is not a number");
  }
  return v;
}

void SaveEpisodes(std::span<const Episode> episodes,
                  const std::filesystem::path& measurements_path,
                  const std::filesystem::path& labels_path) {
  std::ofstream meas = OpenForWrite(measurements_path);
  std::ofstream labels = OpenForWrite(labels_path);
  meas << "episode_id,variable,hour,value\n";
  labels << "episode_id,label\n";
  for (const Episode& ep : episodes) {
    CheckId(ep.episode_id);
    labels << ep.episode_id << ',' << ep.label << '\n';
    for (const auto& [name, series] : ep.series) {
      if (name.find_first_of(",\n\r") != std::string::npos) {
        throw DataError("variable name '" + name + "' contains a separator");
      }
      for (const auto& m : series) {
        meas << ep.episode_id << ',' << name << ',' << FormatDouble(m.hour)
             << ',' << FormatDouble(m.value) << '\n';
      }
    }
  }
  if (!meas || !labels) throw DataError("write failed");
}

std::vector<Episode> LoadEpisodes(
    const std::filesystem::path& measurements_path,
    const std::filesystem::path& labels_path) {
  std::vector<Episode> episodes;
  std::unordered_map<std::string, std::size_t> index;
  {
    std::ifstream in = OpenForRead(labels_path);
    ExpectHeader(in, "episode_id,label", labels_path);
    std::string raw;
    std::size_t line_no = 1;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string_view line = StripCr(raw);
      if (line.empty()) continue;
      const auto fields = SplitCsvLine(line);
      if (fields.size() != 2) {
        throw DataError("labels row needs 2 fields, got " +
                            std::to_string(fields.size()),
                        line_no);
      }
      Episode ep;
      ep.episode_id = std::string(fields[0]);
      if (ep.episode_id.empty()) throw DataError("empty episode id", line_no);
      ep.label = ParseLabel(fields[1], line_no);
      if (!index.emplace(ep.episode_id, episodes.size()).second) {
        throw DataError("duplicate label for episode '" + ep.episode_id + "'",
                        line_no);
      }
      episodes.push_back(std::move(ep));
    }
  }

  std::ifstream in = OpenForRead(measurements_path);
  ExpectHeader(in, "episode_id,variable,hour,value", measurements_path);
  std::string raw;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripCr(raw);
    if (line.empty()) continue;
    const auto fields = SplitCsvLine(line);
    if (fields.size() != 4) {
      throw DataError("measurement row needs 4 fields, got " +
                          std::to_string(fields.size()),
                      line_no);
    }
    double hour, value;
    try {
      hour = ParseDouble(fields[2]);
      value = ParseDouble(fields[3]);
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
    if (!(hour >= 0.0 && hour <= features::kHorizonHours)) {
      throw DataError("hour " + std::string(fields[2]) +
                          " outside [0, 48]",
                      line_no);
    }
    if (!std::isfinite(value)) {
      throw DataError("non-finite value", line_no);
    }
    const auto it = index.find(std::string(fields[0]));
    if (it == index.end()) {
      throw DataError("no label for episode '" + std::string(fields[0]) + "'",
                      line_no);
    }
    episodes[it->second].series[std::string(fields[1])].push_back({hour, value});
  }

  for (Episode& ep : episodes) {
    for (auto& [name, series] : ep.series) {
      std::stable_sort(series.begin(), series.end(), [](const auto& a,
                                                        const auto& b) {
        return a.hour < b.hour;
      });
    }
  }
  return episodes;
}

void SaveFeatureCsv(const features::FeatureMatrix& fm,
                    std::span<const std::string> feature_names,
                    const std::filesystem::path& path) {
  if (feature_names.size() != fm.rows.cols()) {
    throw DimensionError("feature name count does not match matrix width");
  }
  std::ofstream out = OpenForWrite(path);
  out << "episode_id,label";
  for (const auto& name : feature_names) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < fm.rows.rows(); ++r) {
    CheckId(fm.episode_ids[r]);
    out << fm.episode_ids[r] << ',' << fm.labels[r];
    for (double v : fm.rows.row(r)) out << ',' << FormatDouble(v);
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

features::FeatureMatrix LoadFeatureCsv(const std::filesystem::path& path) {
  std::ifstream in = OpenForRead(path);
  std::string raw;
  if (!std::getline(in, raw)) throw DataError("missing header", 1);
  const auto header = SplitCsvLine(StripCr(raw));
  if (header.size() < 2 || header[0] != "episode_id" || header[1] != "label") {
    throw DataError("header must start with 'episode_id,label'", 1);
  }
  const std::size_t width = header.size() - 2;
  if (width == 0 || width % features::kFeaturesPerVariable != 0) {
    throw DataError("feature count " + std::to_string(width) +
                        " is not a positive multiple of 42",
                    1);
  }
  features::FeatureMatrix fm;
  fm.num_variables = width / features::kFeaturesPerVariable;
  fm.rows = Matrix(0, width);
  std::vector<double> row(width);
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = StripCr(raw);
    if (line.empty()) continue;
    const auto fields = SplitCsvLine(line);
    if (fields.size() != header.size()) {
      throw DataError("expected " + std::to_string(header.size()) +
                          " fields, got " + std::to_string(fields.size()),
                      line_no);
    }
    for (std::size_t c = 0; c < width; ++c) {
      try {
        row[c] = ParseDouble(fields[c + 2]);
      } catch (const DataError& e) {
        throw DataError(e.what(), line_no);
      }
    }
    fm.episode_ids.emplace_back(fields[0]);
    fm.labels.push_back(ParseLabel(fields[1], line_no));
    fm.rows.AppendRow(row);
  }
  return fm;
}

SplitIndices SplitTrainTest(std::span<const int> labels, double test_fraction,
                            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw UsageError("test_fraction must lie strictly between 0 and 1");
  }
  SplitIndices out;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members = ClassIndices(labels, cls);
    if (members.size() < 2) {
      throw DimensionError("class " + std::to_string(cls) + " has " +
                           std::to_string(members.size()) +
                           " episodes; a stratified split needs at least 2");
    }
    RandomEngine rng(DeriveSeed(seed, 0x5B117ULL + cls));
    Shuffle(std::span<std::size_t>(members), rng);
    const auto want = static_cast<std::size_t>(std::llround(
        test_fraction * static_cast<double>(members.size())));
    const std::size_t n_test = std::clamp<std::size_t>(want, 1, members.size() - 1);
    out.test.insert(out.test.end(), members.begin(), members.begin() + n_test);
    out.train.insert(out.train.end(), members.begin() + n_test, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

EpisodeSplit SplitTrainTest(std::span<const Episode> episodes,
                            double test_fraction, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(episodes.size());
  for (const auto& ep : episodes) labels.push_back(ep.label);
  const SplitIndices idx = SplitTrainTest(labels, test_fraction, seed);
  EpisodeSplit out;
  for (std::size_t i : idx.train) out.train.push_back(episodes[i]);
  for (std::size_t i : idx.test) out.test.push_back(episodes[i]);
  return out;
}

std::string_view ToString(PartitionStrategy strategy) {
  return strategy == PartitionStrategy::kEqualIid ? "equal_iid" : "label_skew";
}

PartitionStrategy ParsePartitionStrategy(std::string_view name) {
  if (name == "equal_iid") return PartitionStrategy::kEqualIid;
  if (name == "label_skew") return PartitionStrategy::kLabelSkew;
  throw UsageError("unknown partition strategy '" + std::string(name) +
                   "'; valid values: equal_iid, label_skew");
}

std::vector<std::vector<std::size_t>> PartitionRows(
    std::span<const int> labels, const PartitionPlan& plan) {
  CheckPlan(plan, labels.size(), "input");
  if (plan.strategy == PartitionStrategy::kEqualIid) {
    return EqualIid(labels.size(), plan.num_hospitals, plan.seed);
  }
  for (int attempt = 0; attempt < kMaxSkewAttempts; ++attempt) {
    auto shards = AssignByProportions(labels, DrawProportions(plan, attempt),
                                      DeriveSeed(plan.seed, attempt));
    if (AllNonEmpty(shards)) return shards;
  }
  throw DimensionError("label-skew partition left a hospital empty after " +
                       std::to_string(kMaxSkewAttempts) +
                       " draws; raise skew_alpha or add rows");
}

std::vector<HospitalDataset> Partition(const Samples& train,
                                       const Samples& test,
                                       const PartitionPlan& plan) {
  CheckPlan(plan, train.size(), "train");
  CheckPlan(plan, test.size(), "test");

  std::vector<std::vector<std::size_t>> train_shards, test_shards;
  if (plan.strategy == PartitionStrategy::kEqualIid) {
    train_shards = EqualIid(train.size(), plan.num_hospitals,
                            DeriveSeed(plan.seed, 0x7A1Eu));
    test_shards = EqualIid(test.size(), plan.num_hospitals,
                           DeriveSeed(plan.seed, 0x7E57u));
  } else {
    bool ok = false;
    for (int attempt = 0; attempt < kMaxSkewAttempts && !ok; ++attempt) {
      const ClassProportions props = DrawProportions(plan, attempt);
      train_shards = AssignByProportions(
          train.y, props, DeriveSeed(plan.seed ^ 0x7A1Eu, attempt));
      test_shards = AssignByProportions(
          test.y, props, DeriveSeed(plan.seed ^ 0x7E57u, attempt));
      ok = AllNonEmpty(train_shards) && AllNonEmpty(test_shards);
    }
    if (!ok) {
      throw DimensionError(
          "label-skew partition left a hospital empty; raise skew_alpha or "
          "add rows");
    }
  }

  std::vector<HospitalDataset> out;
  for (std::size_t k = 0; k < plan.num_hospitals; ++k) {
    out.push_back(HospitalDataset{static_cast<std::uint32_t>(k + 1),
                                  train.Select(train_shards[k]),
                                  test.Select(test_shards[k])});
  }
  return out;
}

}  // namespace fedicu::data
