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

// Federated training across hospitals that keep their rows local.
//
// One round, driven by the server:
//   1. pick a cohort of hospitals and broadcast the global parameters;
//   2. each cohort member trains locally and returns parameters plus its
//      training-set size;
//   3. the server averages the returned parameters weighted by
//      |D_k| / sum_j |D_j|;
//   4. every hospital (not just the cohort) scores the candidate on its local
//      test rows; the server averages the scores weighted by test-set size;
//   5. with the gate enabled, a candidate scoring strictly below the incumbent
//      is discarded and the previous parameters and score are kept.

#ifndef FEDICU_FEDERATION_H_
#define FEDICU_FEDERATION_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "fedicu/matrix.h"
#include "fedicu/model.h"
#include "fedicu/transport.h"

namespace fedicu::federation {

using model::ModelArch;
using model::ParameterVector;

enum class GateMetric { kAccuracy, kAuroc };

std::string_view ToString(GateMetric metric);
GateMetric ParseGateMetric(std::string_view name);

struct FedConfig {
  std::size_t num_hospitals = 2;
  std::size_t rounds = 100;
  std::size_t local_epochs = 1;
  double cohort_fraction = 1.0;
  bool gate_enabled = true;
  GateMetric gate_metric = GateMetric::kAccuracy;
  std::uint64_t seed = 0;  // cohort selection

  // Throws UsageError.
  void Validate() const;
};

struct RoundRecord {
  std::uint32_t round = 0;
  std::vector<std::uint32_t> cohort;      // hospital ids, ascending
  std::vector<double> weights;            // aligned with cohort
  std::vector<double> hospital_metrics;   // every hospital, ascending id
  double candidate_metric = 0.0;
  bool committed = false;
  double best_metric = 0.0;               // after the decision
  std::uint64_t bytes_sent = 0;           // by the server this round
  std::uint64_t bytes_received = 0;
};

struct FederationState {
  ParameterVector global_params;
  std::uint32_t round = 0;
  double best_accuracy = 0.0;
  std::vector<RoundRecord> history;
};

// p_k = sizes[k] / sum(sizes). Throws DimensionError on an empty cohort or a
// zero size.
std::vector<double> ComputeWeights(std::span<const std::uint64_t> sizes);

// Weighted mean of `updates`, accumulated in the order given. The running
// mean is folded in one update at a time and kept inside the envelope of
// the inputs, so identical inputs come back bit-exact.
ParameterVector Aggregate(std::span<const ParameterVector> updates,
                          std::span<const double> weights);

struct HospitalUpdate {
  std::uint32_t hospital_id = 0;
  std::uint64_t n_samples = 0;
  ParameterVector params;
};

// Sorts by hospital id, then ComputeWeights + Aggregate. The result does not
// depend on the order of `updates`.
std::pair<ParameterVector, std::vector<double>> AggregateUpdates(
    std::vector<HospitalUpdate> updates);

// Training seed for one hospital in one round. Hospital 1 in round 0 uses
// `base` unchanged.
std::uint64_t LocalTrainSeed(std::uint64_t base, std::uint32_t hospital_id,
                             std::uint32_t round);

// model::Train from `global_params` on the local training rows. `train_cfg`
// supplies epochs and seed as given.
std::pair<ParameterVector, std::uint64_t> LocalUpdate(
    const HospitalDataset& hospital, const ParameterVector& global_params,
    const ModelArch& arch, const model::TrainConfig& train_cfg);

// Gate metric on the local test rows, with the test-set size.
std::pair<double, std::uint64_t> LocalTestAccuracy(
    const HospitalDataset& hospital, const ParameterVector& params,
    const ModelArch& arch, GateMetric metric);

// sum(n_k * a_k) / sum(n_k).
double WeightedAccuracy(std::span<const double> values,
                        std::span<const std::uint64_t> n_tests);

// Commits `candidate` unless a_new < best_accuracy, in which case the
// previous parameters and score stay. Advances the round and appends a
// history record either way.
FederationState GateAndCommit(FederationState state, ParameterVector candidate,
                              double a_new);

// Same bookkeeping without the gate: always commits.
FederationState CommitUnconditionally(FederationState state,
                                      ParameterVector candidate, double a_new);

// Uniform sample of max(1, ceil(fraction * K)) ids from 1..K without
// replacement, sorted. Deterministic per (seed, round).
std::vector<std::uint32_t> SelectCohort(std::size_t num_hospitals,
                                        double cohort_fraction,
                                        std::uint64_t seed,
                                        std::uint32_t round);

// ---------------------------------------------------------------------------
// Protocol endpoints.

struct RegisteredHospital {
  std::uint32_t hospital_id = 0;
  std::uint64_t n_train = 0;
  std::uint64_t n_test = 0;
  std::unique_ptr<transport::Connection> connection;
};

// Reads the Register message from a fresh connection. Throws ProtocolError
// if the id is already in `taken` or the first message is not a Register.
transport::Register ReadRegistration(transport::Connection& connection,
                                     std::span<const RegisteredHospital> taken);

using RejectHandler = std::function<void(const std::exception&)>;

// Accepts connections until `expected` distinct hospitals have registered.
// Rejected workers are sent Shutdown and dropped. Result is sorted by id.
std::vector<RegisteredHospital> AcceptHospitals(
    transport::Listener& listener, std::size_t expected,
    std::chrono::milliseconds timeout, const RejectHandler& on_reject = {});

using RoundObserver =
    std::function<void(const RoundRecord&, const ParameterVector& global)>;

// Runs cfg.rounds rounds over registered hospitals, then sends Shutdown.
// Errors from the transport are rethrown with the round number attached.
FederationState RunFederation(std::span<RegisteredHospital> hospitals,
                              const ModelArch& arch, ParameterVector initial,
                              const FedConfig& cfg,
                              const RoundObserver& observer = {});

struct WorkerConfig {
  ModelArch arch;
  // epochs is the number of local epochs per round; seed is the base passed
  // to LocalTrainSeed.
  model::TrainConfig train;
  GateMetric gate_metric = GateMetric::kAccuracy;
};

// Hospital side of the protocol. Sends Register, then answers
// BroadcastModel and EvalRequest until Shutdown. A Shutdown before any
// request means the server refused the registration (ProtocolError).
void ServeHospital(transport::Connection& connection,
                   const HospitalDataset& hospital, const WorkerConfig& cfg);

enum class SimulatedTransport { kInProcess, kTcpLoopback };

// Runs server and hospitals inside this process, one thread per hospital.
// A hospital's own failure takes precedence over the server error it causes;
// a hospital that merely lost its connection does not.
FederationState RunSimulation(std::span<const HospitalDataset> hospitals,
                              const ModelArch& arch, ParameterVector initial,
                              const FedConfig& fed_cfg,
                              const model::TrainConfig& train_cfg,
                              SimulatedTransport transport =
                                  SimulatedTransport::kInProcess,
                              const RoundObserver& observer = {});

}  // namespace fedicu::federation

#endif  // FEDICU_FEDERATION_H_
