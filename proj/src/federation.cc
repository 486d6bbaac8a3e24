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

#include "fedicu/federation.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <thread>

#include "fedicu/errors.h"
#include "fedicu/metrics.h"
#include "fedicu/random.h"

namespace fedicu::federation {

namespace {

constexpr std::chrono::milliseconds kSimulationAcceptTimeout{30000};

template <typename T>
T Expect(transport::Message msg, const std::string& peer,
         std::string_view expected) {
  if (auto* m = std::get_if<T>(&msg)) return std::move(*m);
  throw ProtocolError("expected " + std::string(expected) + " from " + peer +
                      ", got " + std::string(transport::MessageName(msg)));
}

void CheckRemoteParams(const std::vector<double>& params,
                       const ModelArch& arch, const std::string& peer) {
  if (params.size() != arch.ParameterCount()) {
    throw ProtocolError(peer + " sent " + std::to_string(params.size()) +
                        " parameters, model has " +
                        std::to_string(arch.ParameterCount()));
  }
}

std::uint64_t TotalSent(std::span<RegisteredHospital> hospitals) {
  std::uint64_t total = 0;
  for (const auto& h : hospitals) total += h.connection->bytes_sent();
  return total;
}

std::uint64_t TotalReceived(std::span<RegisteredHospital> hospitals) {
  std::uint64_t total = 0;
  for (const auto& h : hospitals) total += h.connection->bytes_received();
  return total;
}

FederationState Record(FederationState state, double a_new, bool committed) {
  RoundRecord rec;
  rec.round = state.round;
  rec.candidate_metric = a_new;
  rec.committed = committed;
  rec.best_metric = state.best_accuracy;
  state.history.push_back(std::move(rec));
  ++state.round;
  return state;
}

// One federation round over live connections.
FederationState RunRound(std::span<RegisteredHospital> hospitals,
                         const ModelArch& arch, FederationState state,
                         const FedConfig& cfg) {
  const std::uint32_t round = state.round;
  const std::uint64_t sent_before = TotalSent(hospitals);
  const std::uint64_t received_before = TotalReceived(hospitals);

  const std::vector<std::uint32_t> positions =
      SelectCohort(hospitals.size(), cfg.cohort_fraction, cfg.seed, round);

  for (std::uint32_t pos : positions) {
    hospitals[pos - 1].connection->Send(
        transport::BroadcastModel{round, state.global_params.values});
  }

  std::vector<HospitalUpdate> updates;
  std::vector<std::uint32_t> cohort_ids;
  for (std::uint32_t pos : positions) {
    RegisteredHospital& h = hospitals[pos - 1];
    const std::string& peer = h.connection->peer();
    auto update = Expect<transport::LocalUpdate>(h.connection->Recv(), peer,
                                                 "LocalUpdate");
    if (update.hospital_id != h.hospital_id || update.round != round) {
      throw ProtocolError("LocalUpdate from " + peer + " is tagged hospital " +
                          std::to_string(update.hospital_id) + " round " +
                          std::to_string(update.round));
    }
    CheckRemoteParams(update.params, arch, peer);
    cohort_ids.push_back(h.hospital_id);
    updates.push_back(HospitalUpdate{h.hospital_id, update.n_samples,
                                     ParameterVector(std::move(update.params))});
  }
  auto [candidate, weights] = AggregateUpdates(std::move(updates));

  for (auto& h : hospitals) {
    h.connection->Send(transport::EvalRequest{round, candidate.values});
  }
  std::vector<double> values;
  std::vector<std::uint64_t> n_tests;
  for (auto& h : hospitals) {
    const std::string& peer = h.connection->peer();
    const auto result = Expect<transport::EvalResult>(h.connection->Recv(),
                                                      peer, "EvalResult");
    if (result.hospital_id != h.hospital_id || result.round != round) {
      throw ProtocolError("EvalResult from " + peer + " is tagged hospital " +
                          std::to_string(result.hospital_id) + " round " +
                          std::to_string(result.round));
    }
    values.push_back(result.value);
    n_tests.push_back(result.n_test);
  }
  const double a_new = WeightedAccuracy(values, n_tests);

  state = cfg.gate_enabled
              ? GateAndCommit(std::move(state), std::move(candidate), a_new)
              : CommitUnconditionally(std::move(state), std::move(candidate),
                                      a_new);
  RoundRecord& rec = state.history.back();
  rec.cohort = std::move(cohort_ids);
  rec.weights = std::move(weights);
  rec.hospital_metrics = std::move(values);
  rec.bytes_sent = TotalSent(hospitals) - sent_before;
  rec.bytes_received = TotalReceived(hospitals) - received_before;
  return state;
}

}  // namespace

std::string_view ToString(GateMetric metric) {
  return metric == GateMetric::kAccuracy ? "accuracy" : "auroc";
}

GateMetric ParseGateMetric(std::string_view name) {
  if (name == "accuracy") return GateMetric::kAccuracy;
  if (name == "auroc") return GateMetric::kAuroc;
  throw UsageError("unknown gate metric '" + std::string(name) +
                   "'; valid values: accuracy, auroc");
}

void FedConfig::Validate() const {
  if (num_hospitals == 0) throw UsageError("need at least one hospital");
  if (rounds == 0) throw UsageError("need at least one round");
  if (!(cohort_fraction > 0.0 && cohort_fraction <= 1.0)) {
    throw UsageError("cohort_fraction must lie in (0, 1]");
  }
}

std::vector<double> ComputeWeights(std::span<const std::uint64_t> sizes) {
  if (sizes.empty()) throw DimensionError("cannot weight an empty cohort");
  std::uint64_t total = 0;
  for (std::uint64_t s : sizes) {
    if (s == 0) throw DimensionError("hospital with an empty training set");
    total += s;
  }
  std::vector<double> weights;
  weights.reserve(sizes.size());
  for (std::uint64_t s : sizes) {
    weights.push_back(static_cast<double>(s) / static_cast<double>(total));
  }
  return weights;
}

ParameterVector Aggregate(std::span<const ParameterVector> updates,
                          std::span<const double> weights) {
  if (updates.empty()) throw DimensionError("nothing to aggregate");
  if (updates.size() != weights.size()) {
    throw DimensionError(std::to_string(updates.size()) + " updates vs " +
                         std::to_string(weights.size()) + " weights");
  }
  const std::size_t d = updates.front().size();
  for (const auto& u : updates) {
    if (u.size() != d) {
      throw DimensionError("update of length " + std::to_string(u.size()) +
                           " does not match length " + std::to_string(d));
    }
  }

  // mean_k = mean_{k-1} + (p_k / P_k) (w_k - mean_{k-1}), P_k = p_1 + ... + p_k.
  ParameterVector mean = updates.front();
  double cumulative = weights.front();
  for (std::size_t k = 1; k < updates.size(); ++k) {
    cumulative += weights[k];
    if (weights[k] == 0.0) continue;
    const double step = weights[k] / cumulative;
    const auto& w = updates[k].values;
    for (std::size_t i = 0; i < d; ++i) {
      const double lo = std::min(mean[i], w[i]);
      const double hi = std::max(mean[i], w[i]);
      mean[i] = std::clamp(mean[i] + step * (w[i] - mean[i]), lo, hi);
    }
  }
  return mean;
}

std::pair<ParameterVector, std::vector<double>> AggregateUpdates(
    std::vector<HospitalUpdate> updates) {
  std::sort(updates.begin(), updates.end(),
            [](const auto& a, const auto& b) {
              return a.hospital_id < b.hospital_id;
            });
  std::vector<std::uint64_t> sizes;
  std::vector<ParameterVector> params;
  for (auto& u : updates) {
    sizes.push_back(u.n_samples);
    params.push_back(std::move(u.params));
  }
  std::vector<double> weights = ComputeWeights(sizes);
  return {Aggregate(params, weights), std::move(weights)};
}

std::uint64_t LocalTrainSeed(std::uint64_t base, std::uint32_t hospital_id,
                             std::uint32_t round) {
  return base + static_cast<std::uint64_t>(round) * 0x9E3779B97F4A7C15ULL +
         (static_cast<std::uint64_t>(hospital_id) - 1) * 0xBF58476D1CE4E5B9ULL;
}

std::pair<ParameterVector, std::uint64_t> LocalUpdate(
    const HospitalDataset& hospital, const ParameterVector& global_params,
    const ModelArch& arch, const model::TrainConfig& train_cfg) {
  return {model::Train(arch, global_params, hospital.train, train_cfg),
          hospital.train.size()};
}

std::pair<double, std::uint64_t> LocalTestAccuracy(
    const HospitalDataset& hospital, const ParameterVector& params,
    const ModelArch& arch, GateMetric metric) {
  if (hospital.test.empty()) {
    throw DimensionError("hospital " + std::to_string(hospital.hospital_id) +
                         " has no test rows");
  }
  const std::vector<double> scores =
      model::Predict(arch, params, hospital.test.x);
  const double value = metric == GateMetric::kAccuracy
                           ? metrics::Accuracy(scores, hospital.test.y)
                           : metrics::Auroc(scores, hospital.test.y);
  return {value, hospital.test.size()};
}

double WeightedAccuracy(std::span<const double> values,
                        std::span<const std::uint64_t> n_tests) {
  if (values.empty()) throw DimensionError("no hospital metrics to average");
  if (values.size() != n_tests.size()) {
    throw DimensionError("metric and test-size counts differ");
  }
  double numerator = 0.0;
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    numerator += static_cast<double>(n_tests[k]) * values[k];
    total += n_tests[k];
  }
  if (total == 0) throw DimensionError("all hospital test sets are empty");
  return numerator / static_cast<double>(total);
}

FederationState GateAndCommit(FederationState state, ParameterVector candidate,
                              double a_new) {
  if (a_new < state.best_accuracy) {
    return Record(std::move(state), a_new, /*committed=*/false);
  }
  state.global_params = std::move(candidate);
  state.best_accuracy = a_new;
  return Record(std::move(state), a_new, /*committed=*/true);
}

FederationState CommitUnconditionally(FederationState state,
                                      ParameterVector candidate, double a_new) {
  state.global_params = std::move(candidate);
  state.best_accuracy = a_new;
  return Record(std::move(state), a_new, /*committed=*/true);
}

std::vector<std::uint32_t> SelectCohort(std::size_t num_hospitals,
                                        double cohort_fraction,
                                        std::uint64_t seed,
                                        std::uint32_t round) {
  if (num_hospitals == 0) throw UsageError("need at least one hospital");
  if (!(cohort_fraction > 0.0 && cohort_fraction <= 1.0)) {
    throw UsageError("cohort_fraction must lie in (0, 1]");
  }
  const auto size = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::ceil(cohort_fraction * static_cast<double>(num_hospitals))),
      1, num_hospitals);
  std::vector<std::uint32_t> ids(num_hospitals);
  std::iota(ids.begin(), ids.end(), 1u);
  if (size < num_hospitals) {
    RandomEngine rng(DeriveSeed(seed, 0xC0407ULL + round));
    Shuffle(std::span<std::uint32_t>(ids), rng);
    ids.resize(size);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

transport::Register ReadRegistration(
    transport::Connection& connection,
    std::span<const RegisteredHospital> taken) {
  const auto reg = Expect<transport::Register>(connection.Recv(),
                                               connection.peer(), "Register");
  for (const auto& h : taken) {
    if (h.hospital_id == reg.hospital_id) {
      throw ProtocolError("hospital id " + std::to_string(reg.hospital_id) +
                          " from " + connection.peer() +
                          " is already registered");
    }
  }
  if (reg.n_train == 0 || reg.n_test == 0) {
    throw ProtocolError("hospital " + std::to_string(reg.hospital_id) +
                        " registered with an empty train or test set");
  }
  return reg;
}

std::vector<RegisteredHospital> AcceptHospitals(
    transport::Listener& listener, std::size_t expected,
    std::chrono::milliseconds timeout, const RejectHandler& on_reject) {
  std::vector<RegisteredHospital> hospitals;
  while (hospitals.size() < expected) {
    std::unique_ptr<transport::Connection> conn = listener.Accept(timeout);
    try {
      const transport::Register reg = ReadRegistration(*conn, hospitals);
      hospitals.push_back(RegisteredHospital{reg.hospital_id, reg.n_train,
                                             reg.n_test, std::move(conn)});
    } catch (const ProtocolError& e) {
      if (on_reject) on_reject(e);
      try {
        conn->Send(transport::Shutdown{});
      } catch (const TransportError&) {
      }
    } catch (const TransportError& e) {
      if (on_reject) on_reject(e);
    }
  }
  std::sort(hospitals.begin(), hospitals.end(),
            [](const auto& a, const auto& b) {
              return a.hospital_id < b.hospital_id;
            });
  return hospitals;
}

FederationState RunFederation(std::span<RegisteredHospital> hospitals,
                              const ModelArch& arch, ParameterVector initial,
                              const FedConfig& cfg,
                              const RoundObserver& observer) {
  cfg.Validate();
  model::CheckParams(arch, initial);
  if (hospitals.size() != cfg.num_hospitals) {
    throw UsageError("configured for " + std::to_string(cfg.num_hospitals) +
                     " hospitals, " + std::to_string(hospitals.size()) +
                     " registered");
  }

  FederationState state;
  state.global_params = std::move(initial);
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    const std::string where = "round " + std::to_string(state.round) + ": ";
    try {
      state = RunRound(hospitals, arch, std::move(state), cfg);
    } catch (const TransportError& e) {
      throw TransportError(where + e.what());
    } catch (const FramingError& e) {
      throw FramingError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const ProtocolError& e) {
      throw ProtocolError(where + e.what());
    }
    if (observer) observer(state.history.back(), state.global_params);
  }
  for (auto& h : hospitals) h.connection->Send(transport::Shutdown{});
  return state;
}

void ServeHospital(transport::Connection& connection,
                   const HospitalDataset& hospital, const WorkerConfig& cfg) {
  cfg.arch.Validate();
  if (hospital.train.empty() || hospital.test.empty()) {
    throw DimensionError("hospital " + std::to_string(hospital.hospital_id) +
                         " needs non-empty train and test sets");
  }
  connection.Send(transport::Register{hospital.hospital_id,
                                      hospital.train.size(),
                                      hospital.test.size()});
  bool served_any = false;
  std::uint32_t last_round = 0;
  auto check_round = [&](std::uint32_t round) {
    if (served_any && round < last_round) {
      throw ProtocolError("round went backwards from " +
                          std::to_string(last_round) + " to " +
                          std::to_string(round));
    }
    last_round = round;
    served_any = true;
  };
  const std::string& peer = connection.peer();

  while (true) {
    transport::Message msg = connection.Recv();
    if (auto* b = std::get_if<transport::BroadcastModel>(&msg)) {
      check_round(b->round);
      CheckRemoteParams(b->params, cfg.arch, peer);
      model::TrainConfig train = cfg.train;
      train.seed = LocalTrainSeed(cfg.train.seed, hospital.hospital_id, b->round);
      auto [params, n] = LocalUpdate(hospital, ParameterVector(std::move(b->params)),
                                     cfg.arch, train);
      connection.Send(transport::LocalUpdate{hospital.hospital_id, b->round, n,
                                             std::move(params.values)});
    } else if (auto* e = std::get_if<transport::EvalRequest>(&msg)) {
      check_round(e->round);
      CheckRemoteParams(e->params, cfg.arch, peer);
      const auto [value, n_test] =
          LocalTestAccuracy(hospital, ParameterVector(std::move(e->params)),
                            cfg.arch, cfg.gate_metric);
      connection.Send(
          transport::EvalResult{hospital.hospital_id, e->round, value, n_test});
    } else if (std::holds_alternative<transport::Shutdown>(msg)) {
      if (!served_any) {
        throw ProtocolError("server rejected the registration of hospital " +
                            std::to_string(hospital.hospital_id));
      }
      return;
    } else {
      throw ProtocolError("unexpected " +
                          std::string(transport::MessageName(msg)) + " from " +
                          peer);
    }
  }
}

FederationState RunSimulation(std::span<const HospitalDataset> hospitals,
                              const ModelArch& arch, ParameterVector initial,
                              const FedConfig& fed_cfg,
                              const model::TrainConfig& train_cfg,
                              SimulatedTransport transport,
                              const RoundObserver& observer) {
  fed_cfg.Validate();
  if (hospitals.size() != fed_cfg.num_hospitals) {
    throw UsageError("configured for " + std::to_string(fed_cfg.num_hospitals) +
                     " hospitals, " + std::to_string(hospitals.size()) +
                     " given");
  }
  for (const auto& h : hospitals) {
    if (h.train.empty() || h.test.empty()) {
      throw DimensionError("hospital " + std::to_string(h.hospital_id) +
                           " needs non-empty train and test sets");
    }
  }
  WorkerConfig worker_cfg{arch, train_cfg, fed_cfg.gate_metric};
  worker_cfg.train.epochs = fed_cfg.local_epochs;

  std::unique_ptr<transport::Listener> listener;
  std::vector<std::unique_ptr<transport::Connection>> worker_ends;
  std::optional<transport::HostPort> tcp_addr;
  if (transport == SimulatedTransport::kInProcess) {
    auto in_process = std::make_unique<transport::InProcessListener>();
    for (const auto& h : hospitals) {
      worker_ends.push_back(
          in_process->Connect("hospital-" + std::to_string(h.hospital_id)));
    }
    listener = std::move(in_process);
  } else {
    auto tcp = std::make_unique<transport::TcpListener>(
        transport::HostPort{"127.0.0.1", 0});
    tcp_addr = transport::HostPort{"127.0.0.1", tcp->port()};
    listener = std::move(tcp);
    worker_ends.resize(hospitals.size());
  }

  std::vector<std::exception_ptr> worker_errors(hospitals.size());
  std::vector<std::thread> threads;
  for (std::size_t k = 0; k < hospitals.size(); ++k) {
    threads.emplace_back([&, k, conn = std::move(worker_ends[k])]() mutable {
      try {
        if (!conn) conn = transport::TcpConnect(*tcp_addr);
        ServeHospital(*conn, hospitals[k], worker_cfg);
      } catch (...) {
        worker_errors[k] = std::current_exception();
      }
    });
  }

  std::exception_ptr server_error;
  FederationState state;
  {
    std::vector<RegisteredHospital> registered;
    try {
      registered = AcceptHospitals(*listener, hospitals.size(),
                                   kSimulationAcceptTimeout);
      state = RunFederation(registered, arch, std::move(initial), fed_cfg,
                            observer);
    } catch (...) {
      server_error = std::current_exception();
    }
    // Dropping the server ends unblocks any worker still waiting.
  }
  for (auto& t : threads) t.join();
  // A worker that lost its connection is usually a symptom of the server
  // failing; any other worker error is the root cause.
  std::exception_ptr disconnected;
  for (const auto& e : worker_errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const TransportError&) {
      if (!disconnected) disconnected = e;
    } catch (...) {
      throw;
    }
  }
  if (server_error) std::rethrow_exception(server_error);
  if (disconnected) std::rethrow_exception(disconnected);
  return state;
}

}  // namespace fedicu::federation
