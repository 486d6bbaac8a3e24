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

// End-to-end acceptance checks. Prints one PASS/FAIL line per check and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fedicu/experiment.h"
#include "fedicu/features.h"
#include "fedicu/federation.h"
#include "fedicu/metrics.h"
#include "fedicu/transport.h"
#include "gradient_check.h"
#include "oracles.h"
#include "toy_data.h"
#include "wire_vocabulary.h"

namespace {

using fedicu::experiment::ExperimentConfig;
using fedicu::experiment::Mode;
using fedicu::model::ModelKind;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kGapTolerance = 0.03;
constexpr double kGapBudgetSeconds = 300;
constexpr double kTcpBudgetSeconds = 120;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// 2000 episodes, 7 variables, effect size 1.0, two equal IID hospitals,
// gate off, 100 rounds of 1 local epoch vs. 100 centralized epochs.
json GapConfig() {
  return {{"episodes", 2000}, {"n_variables", 7}, {"effect_size", 1.0},
          {"hospitals", 2},   {"partition", "equal_iid"},
          {"gate", false},    {"rounds", 100},
          {"local_epochs", 1}, {"epochs", 100},
          {"seed", 20260415}};
}

Outcome FederatedCentralGap() {
  const auto start = Clock::now();
  const auto base = ExperimentConfig::FromJson(GapConfig());
  const auto prepared = fedicu::experiment::PrepareData(base);
  Outcome out{true, ""};
  for (const auto kind : {ModelKind::kLogistic, ModelKind::kMlp}) {
    ExperimentConfig cfg = base;
    cfg.model = kind;
    cfg.mode = Mode::kCentral;
    const double central =
        fedicu::experiment::RunPrepared(cfg, prepared).metrics.auroc;
    cfg.mode = Mode::kFederated;
    const double federated =
        fedicu::experiment::RunPrepared(cfg, prepared).metrics.auroc;
    const double gap = std::abs(federated - central);
    out.pass &= gap <= kGapTolerance;
    out.detail += Fmt("%s central %.4f federated %.4f |gap| %.4f; ",
                      kind == ModelKind::kLogistic ? "LR" : "MLP", central,
                      federated, gap);
  }
  const double elapsed = Seconds(start);
  out.pass &= elapsed < kGapBudgetSeconds;
  out.detail += Fmt("tolerance %.2f; %.1f s (budget %.0f s)", kGapTolerance,
                    elapsed, kGapBudgetSeconds);
  return out;
}

Outcome CentralizedEquivalence() {
  Outcome out{true, ""};
  int cases = 0;
  for (const auto kind : {ModelKind::kLogistic, ModelKind::kMlp}) {
    for (const auto transport : {fedicu::federation::SimulatedTransport::kInProcess,
                                 fedicu::federation::SimulatedTransport::kTcpLoopback}) {
      for (int epochs : {1, 5}) {
        json j = {{"episodes", 600}, {"hospitals", 1}, {"cohort_fraction", 1.0},
                  {"gate", false},   {"rounds", 1},    {"local_epochs", epochs},
                  {"epochs", epochs}, {"seed", 99 + epochs}};
        auto cfg = ExperimentConfig::FromJson(j);
        cfg.model = kind;
        cfg.transport = transport;
        const auto prepared = fedicu::experiment::PrepareData(cfg);
        cfg.mode = Mode::kCentral;
        const auto central =
            fedicu::experiment::RunPrepared(cfg, prepared).final_params;
        cfg.mode = Mode::kFederated;
        const auto federated =
            fedicu::experiment::RunPrepared(cfg, prepared).final_params;
        out.pass &= central == federated;
        ++cases;
      }
    }
  }
  out.detail = Fmt("K=1, C=1, gate off, 1 round of E local epochs vs E "
                   "centralized epochs; %d cases (LR/MLP x in-process/TCP x "
                   "E=1,5) compared with ==",
                   cases);
  return out;
}

Outcome GateMonotonicity() {
  json j = {{"episodes", 2000}, {"hospitals", 2}, {"gate", true},
            {"rounds", 200},    {"learning_rate", 1.0},
            {"mode", "federated"}, {"seed", 5}};
  const auto report =
      fedicu::experiment::RunExperiment(ExperimentConfig::FromJson(j));
  const json& history = report.json["history"];
  int reverts = 0;
  bool monotone = true;
  double prev = -1.0;
  for (const auto& rec : history) {
    const double best = rec["best_metric"].get<double>();
    monotone &= best >= prev;
    prev = best;
    reverts += rec["committed"].get<bool>() ? 0 : 1;
  }
  return {monotone && reverts >= 1 && history.size() == 200,
          Fmt("%zu rounds at lr=1.0: best metric non-decreasing=%s, %d "
              "reverts, final best %.4f",
              history.size(), monotone ? "yes" : "no", reverts, prev)};
}

Outcome AggregationProperties() {
  using fedicu::federation::HospitalUpdate;
  using fedicu::model::ParameterVector;
  oracle::Gen gen(4242);
  int failures = 0;
  double max_weight_error = 0;
  const int kCases = 10000;
  for (int t = 0; t < kCases; ++t) {
    const std::size_t k = gen.Int(1, 10), d = gen.Int(1, 16);
    std::vector<std::uint64_t> sizes(k);
    for (auto& s : sizes) s = gen.Int(1, gen.Coin() ? 10 : 1000000);
    std::vector<std::vector<double>> raw(k);
    std::vector<HospitalUpdate> updates;
    for (std::size_t i = 0; i < k; ++i) {
      raw[i] = gen.Reals(d, -1e4, 1e4);
      updates.push_back({static_cast<std::uint32_t>(3 * i + 1), sizes[i],
                         ParameterVector(raw[i])});
    }
    const auto weights = fedicu::federation::ComputeWeights(sizes);
    double sum = 0;
    for (double w : weights) sum += w;
    max_weight_error = std::max(max_weight_error, std::abs(sum - 1.0));
    bool ok = std::abs(sum - 1.0) <= 1e-12;

    const auto mean = fedicu::federation::AggregateUpdates(updates).first;
    for (std::size_t i = 0; i < d; ++i) {
      double lo = raw[0][i], hi = raw[0][i];
      for (const auto& r : raw) {
        lo = std::min(lo, r[i]);
        hi = std::max(hi, r[i]);
      }
      ok &= mean[i] >= lo && mean[i] <= hi;
    }
    auto shuffled = updates;
    std::shuffle(shuffled.begin(), shuffled.end(), gen.engine());
    ok &= fedicu::federation::AggregateUpdates(shuffled).first == mean;

    auto same = updates;
    for (auto& u : same) u.params = ParameterVector(raw[0]);
    ok &= fedicu::federation::AggregateUpdates(same).first ==
          ParameterVector(raw[0]);
    failures += ok ? 0 : 1;
  }
  return {failures == 0,
          Fmt("%d random cases, %d failures; max |sum(p)-1| = %.1e (tol "
              "1e-12); fixed point, envelope, order independence exact",
              kCases, failures, max_weight_error)};
}

Outcome MetricOracles() {
  oracle::Gen gen(777);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = gen.Int(2, 8);
    std::vector<double> scores(n);
    for (double& s : scores) s = gen.Int(0, 5) / 5.0;
    const auto labels = gen.MixedLabels(n);
    if (fedicu::metrics::Auroc(scores, labels) !=
        oracle::BruteForceAuroc(scores, labels)) {
      ++mismatches;
    }
  }
  using V = std::vector<double>;
  using L = std::vector<int>;
  struct Example {
    V s;
    L y;
    double want;
  };
  const Example examples[] = {
      {{0.9, 0.1}, {1, 0}, 1.0},
      {{0.1, 0.9}, {1, 0}, 0.5},
      {{0.2, 0.4, 0.6}, {1, 1, 1}, 1.0},
      {{0.7, 0.1, 0.9, 0.8}, {1, 0, 1, 0}, (1.0 + 2.0 / 3.0) / 2.0},
  };
  int auprc_bad = 0;
  for (const auto& e : examples) {
    auprc_bad += fedicu::metrics::Auprc(e.s, e.y) == e.want ? 0 : 1;
  }
  const bool auroc_example =
      fedicu::metrics::Auroc(V{0.1, 0.4, 0.35, 0.8}, L{0, 0, 1, 1}) == 0.75;
  return {mismatches == 0 && auprc_bad == 0 && auroc_example,
          Fmt("AUROC vs brute force: %d/1000 mismatches (n<=8, ties "
              "included); AUPRC hand examples: %d/4 mismatches",
              mismatches, auprc_bad)};
}

Outcome GradientFidelity() {
  const auto lr = testing_support::GradientCheck(false, 100, 606);
  const auto mlp = testing_support::GradientCheck(true, 100, 607);
  return {lr.triples == 100 && mlp.triples == 100 &&
              lr.max_rel_error < 1e-4 && mlp.max_rel_error < 1e-4,
          Fmt("central differences h=1e-5; max relative error LR %.2e, MLP "
              "%.2e over 100 triples each (tol 1e-4)",
              lr.max_rel_error, mlp.max_rel_error)};
}

Outcome FeaturePipeline() {
  namespace fx = fedicu::features;
  bool ok = true;
  oracle::Gen gen(88);
  for (int t = 0; t < 200; ++t) {
    const std::size_t v = gen.Int(1, 10);
    std::vector<std::string> vars;
    for (std::size_t i = 0; i < v; ++i) vars.push_back("v" + std::to_string(i));
    std::vector<fx::Episode> eps(gen.Int(1, 4));
    for (std::size_t e = 0; e < eps.size(); ++e) {
      eps[e].episode_id = std::to_string(e);
      for (const auto& name : vars) {
        for (int k = gen.Int(0, 6); k > 0; --k) {
          eps[e].series[name].push_back({gen.Real(0, 48), gen.Real(-9, 9)});
        }
      }
    }
    ok &= fx::Extract(eps, vars).rows.cols() == 42 * v;
  }
  const bool width_ok = ok;

  const auto stats = [](std::vector<double> v) {
    const auto a = fx::WindowStats(v);
    return std::vector<double>(a.begin(), a.end());
  };
  const auto near = [](const std::vector<double>& a,
                       const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) > 1e-9) return false;
    }
    return true;
  };
  const bool stats_ok =
      near(stats({1, 2, 3}), {3, 1, 2, 1, 0, 3}) &&
      near(stats({}), {0, 0, 0, 0, 0, 0}) &&
      near(stats({5}), {5, 5, 5, 0, 0, 1}) &&
      std::abs(stats({1, 1, 2})[4] - 1.0 / std::sqrt(2.0)) <= 1e-9;

  const auto cfg = ExperimentConfig::FromJson({{"episodes", 2000}, {"seed", 1}});
  const auto prepared = fedicu::experiment::PrepareData(cfg);
  const auto scaled =
      fx::Scaler::Fit(prepared.train.rows).Transform(prepared.train.rows);
  const auto [lo, hi] =
      std::minmax_element(scaled.data().begin(), scaled.data().end());
  const bool range_ok = *lo >= -1.0 && *hi <= 1.0;
  return {width_ok && stats_ok && range_ok,
          Fmt("width 42*V on 200 random inputs: %s; window stats examples "
              "(incl. skew 1/sqrt 2) within 1e-9: %s; scaled train features "
              "in [%.17g, %.17g]",
              width_ok ? "ok" : "FAILED", stats_ok ? "ok" : "FAILED", *lo,
              *hi)};
}

Outcome Transport() {
  namespace tr = fedicu::transport;
  oracle::Gen gen(99);
  int roundtrip_bad = 0;
  for (int t = 0; t < 5000; ++t) {
    std::vector<double> p(gen.Coin(0.1) ? 0 : gen.Int(1, 50));
    for (double& v : p) v = std::ldexp(gen.Real(-1, 1), gen.Int(-1000, 1000));
    const auto u32 = [&] { return static_cast<std::uint32_t>(gen.Bits()); };
    tr::Message msg;
    switch (gen.Int(0, 5)) {
      case 0: msg = tr::Register{u32(), gen.Bits(), gen.Bits()}; break;
      case 1: msg = tr::BroadcastModel{u32(), p}; break;
      case 2: msg = tr::LocalUpdate{u32(), u32(), gen.Bits(), p}; break;
      case 3: msg = tr::EvalRequest{u32(), p}; break;
      case 4: msg = tr::EvalResult{u32(), u32(), gen.Real(0, 1), gen.Bits()}; break;
      default: msg = tr::Shutdown{};
    }
    roundtrip_bad += tr::Decode(tr::Encode(msg)) == msg ? 0 : 1;
  }
  const tr::Message big = tr::LocalUpdate{1, 2, 3, std::vector<double>(100000, -1.5)};
  roundtrip_bad += tr::Decode(tr::Encode(big)) == big ? 0 : 1;

  const bool frames_ok =
      tr::Encode(tr::Shutdown{}) == std::vector<std::uint8_t>{1, 0, 0, 0, 6} &&
      tr::Encode(tr::BroadcastModel{0, {1.0}}) ==
          std::vector<std::uint8_t>{0x11, 0, 0, 0, 0x02, 0, 0, 0, 0, 1, 0,
                                    0, 0, 0, 0, 0, 0, 0, 0, 0xF0, 0x3F};

  json j = GapConfig();
  j["model"] = "mlp";
  j["mode"] = "federated";
  j["gate"] = true;
  auto cfg = ExperimentConfig::FromJson(j);
  const auto prepared = fedicu::experiment::PrepareData(cfg);
  cfg.transport = fedicu::federation::SimulatedTransport::kInProcess;
  const auto in_process = fedicu::experiment::RunPrepared(cfg, prepared);
  const auto start = Clock::now();
  cfg.transport = fedicu::federation::SimulatedTransport::kTcpLoopback;
  const auto tcp = fedicu::experiment::RunPrepared(cfg, prepared);
  const double elapsed = Seconds(start);
  const bool identical = in_process.final_params == tcp.final_params &&
                         in_process.json["history"] == tcp.json["history"];
  return {roundtrip_bad == 0 && frames_ok && identical &&
              elapsed < kTcpBudgetSeconds,
          Fmt("round trip: %d/5001 mismatches (incl. empty and 100k vectors); "
              "documented frames %s; MLP 100 rounds TCP vs in-process "
              "params %s (digest %s); TCP run %.1f s (budget %.0f s)",
              roundtrip_bad, frames_ok ? "byte-exact" : "DIFFER",
              identical ? "bit-identical" : "DIFFER",
              fedicu::experiment::ParamsDigest(tcp.final_params).c_str(),
              elapsed, kTcpBudgetSeconds)};
}

Outcome PrivacyVocabulary() {
  static_assert(wire_vocabulary::kVocabularyOk,
                "a message field can carry more than ids, counts, a metric "
                "and one parameter vector");
  // Bytes per round for two parameter counts and two dataset scales.
  bool ok = wire_vocabulary::kVocabularyOk;
  std::string detail =
      "message fields audited at compile time (ids, counts, metric, one "
      "parameter vector); bytes/round:";
  for (std::size_t dim : {4, 40}) {
    const auto arch = fedicu::model::ModelArch::Mlp(dim, 5);
    const std::uint64_t d = arch.ParameterCount();
    const std::uint64_t want_sent = 4 * (4 + 9 + 8 * d);
    const std::uint64_t want_received = 2 * (4 + 21 + 8 * d) + 2 * (4 + 25);
    for (std::size_t n : {25, 2500}) {
      const auto hospitals = toy::Hospitals(3, {n, 2 * n}, n / 5, dim);
      fedicu::federation::FedConfig fed;
      fed.num_hospitals = 2;
      fed.rounds = 2;
      const auto state = fedicu::federation::RunSimulation(
          hospitals, arch, fedicu::model::InitParams(arch, 1), fed,
          fedicu::model::TrainConfig{});
      for (const auto& rec : state.history) {
        ok &= rec.bytes_sent == want_sent && rec.bytes_received == want_received;
      }
      const auto& last = state.history.back();
      detail += Fmt(" d=%llu |D|=%zu+%zu -> %llu", (unsigned long long)d, n,
                    2 * n,
                    (unsigned long long)(last.bytes_sent + last.bytes_received));
      detail += ";";
    }
  }
  detail += " expected 6*8d + 4*13 + 2*25 + 2*29 per round for K=2";
  return {ok, detail};
}

}  // namespace

int main() {
  struct Check {
    const char* name;
    std::function<Outcome()> run;
  };
  const Check checks[] = {
      {"federated-vs-centralized AUROC gap", FederatedCentralGap},
      {"centralized equivalence", CentralizedEquivalence},
      {"gate monotonicity", GateMonotonicity},
      {"aggregation correctness", AggregationProperties},
      {"metric oracle equivalence", MetricOracles},
      {"gradient fidelity", GradientFidelity},
      {"feature pipeline", FeaturePipeline},
      {"transport", Transport},
      {"privacy vocabulary", PrivacyVocabulary},
  };
  int failed = 0;
  for (const auto& check : checks) {
    Outcome out;
    try {
      out = check.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += out.pass ? 0 : 1;
    std::printf("%s  %-38s %s\n", out.pass ? "PASS" : "FAIL", check.name,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu acceptance checks passed\n",
              static_cast<int>(std::size(checks)) - failed, std::size(checks));
  return failed == 0 ? 0 : 1;
}
