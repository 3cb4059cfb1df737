#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "dsfacto/partition.hpp"
#include "dsfacto/types.hpp"

namespace dsfacto {

enum class RoutingPolicy { ring, random };

// FIFO token inbox. Any worker may push; only the owning worker pops.
// The driver touches it directly only at phase boundaries, when every
// worker is quiescent.
class TokenQueue {
 public:
  void push(ParamToken token);
  void push_front(ParamToken token);
  std::optional<ParamToken> try_pop();
  std::optional<ParamToken> pop_for(std::chrono::microseconds wait);
  std::size_t size() const;

  template <typename F>
  void for_each(F&& f) const {
    std::lock_guard lock(m_);
    for (const ParamToken& t : q_) f(t);
  }

 private:
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::deque<ParamToken> q_;
};

// Per-worker synchronization terms over the worker's row block. g and a
// hold the values the update phase consumes (stale between accumulate
// passes); linear_partial and sumsq_partial are the running partial sums
// the accumulate phase builds f from.
struct AuxState {
  std::vector<double> g;               // local N
  std::vector<double> a;               // local N x K, row-major
  std::vector<double> linear_partial;  // local N
  std::vector<double> sumsq_partial;   // local N x K, row-major
};

struct WorkerState {
  int id = 0;
  RowBlock block;
  const Dataset* data = nullptr;
  int K = 0;

  double w0_replica = 0.0;
  AuxState aux;

  int epoch = 0;
  Phase phase = Phase::accumulate;
  int updates_done = 0;  // update-phase tokens processed this epoch
  int rounds_done = 0;   // accumulate-phase tokens processed this epoch

  // cols[j] lists (local example, x_ij) for the block, ascending; cols[0]
  // is the bias column covering every local example with value 1.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> cols;

  TokenQueue inbox;
  std::vector<ParamToken> deferred;  // tokens that arrived ahead of this phase
  std::mt19937_64 route_rng;

  WorkerState(int id, const Dataset& data, RowBlock block, int K, std::uint64_t seed);

  std::size_t local_n() const { return block.size(); }
  double local_label(std::size_t li) const {
    return data->examples[block.begin + li].label;
  }

  // Enters (epoch, phase): resets the phase counter, zeroes the accumulate
  // buffers when entering an accumulate pass, and releases deferred tokens
  // back into the inbox (in deferral order, ahead of older arrivals).
  void begin_phase(int epoch, Phase phase);
};

// Applies the stochastic updates for the token's dimension over every local
// example with a nonzero entry, ascending, using the stored (stale) g and a.
// The bias token accumulates w0 steps with no regularizer.
void worker_update_step(WorkerState& w, ParamToken& token, const Hyperparams& hyper,
                        double eta, bool local_a_refresh);

// Folds the token's parameters into the partial sums: linear_partial gets
// w_j x_ij (w0 once per example for the bias token), a gets v_jk x_ij,
// sumsq_partial gets (v_jk x_ij)^2. Token parameters are read-only here.
void worker_accumulate_step(WorkerState& w, const ParamToken& token);

// After all D+1 accumulate visits: f_i = linear_i + 1/2 sum_k (a_ik^2 -
// sumsq_ik), g_i = loss_multiplier(f_i, y_i); linear and sumsq reset.
void finalize_aux(WorkerState& w, LossKind loss);

// ring: (worker_id + 1) mod P. random: uniform over the other workers.
int next_queue(int worker_id, int P, RoutingPolicy policy, std::mt19937_64& rng);

struct EngineConfig {
  int workers = 1;
  int K = 4;
  int epochs = 0;
  Hyperparams hyper;
  double init_sd = 0.01;
  std::uint64_t seed = 1;
  RoutingPolicy routing = RoutingPolicy::ring;
  bool deterministic = false;    // multiplex workers round-robin on one thread
  bool local_a_refresh = false;  // fold each v update into the stored a immediately
  bool eval_per_epoch = true;    // objective + metrics on the epoch snapshot
};

// Invoked at each epoch barrier (epoch 0 is the initial accumulate pass)
// with the assembled model snapshot and the quiescent worker states.
using EpochObserver = std::function<void(
    int epoch, const FMModel& snapshot,
    const std::vector<std::unique_ptr<WorkerState>>& workers)>;

// The hybrid-parallel trainer: P workers own disjoint row blocks and pass
// the D+1 parameter tokens through inbox queues. Every epoch runs an update
// phase (stochastic steps with stale g, a) and an accumulate phase
// (incremental rebuild of g, a), with a barrier between phases.
std::pair<FMModel, TrainTrace> run_dsfacto(const EngineConfig& config, const Dataset& train,
                                           const Dataset* test,
                                           const EpochObserver& observer = {});

}  // namespace dsfacto
