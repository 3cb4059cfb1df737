#include "dsfacto/engine.hpp"

#include <atomic>
#include <bit>
#include <stdexcept>
#include <thread>

#include "dsfacto/fm.hpp"
#include "dsfacto/metrics.hpp"

namespace dsfacto {

void TokenQueue::push(ParamToken token) {
  {
    std::lock_guard lock(m_);
    q_.push_back(std::move(token));
  }
  cv_.notify_one();
}

void TokenQueue::push_front(ParamToken token) {
  {
    std::lock_guard lock(m_);
    q_.push_front(std::move(token));
  }
  cv_.notify_one();
}

std::optional<ParamToken> TokenQueue::try_pop() {
  std::lock_guard lock(m_);
  if (q_.empty()) return std::nullopt;
  ParamToken t = std::move(q_.front());
  q_.pop_front();
  return t;
}

std::optional<ParamToken> TokenQueue::pop_for(std::chrono::microseconds wait) {
  std::unique_lock lock(m_);
  if (!cv_.wait_for(lock, wait, [&] { return !q_.empty(); })) {
    return std::nullopt;
  }
  ParamToken t = std::move(q_.front());
  q_.pop_front();
  return t;
}

std::size_t TokenQueue::size() const {
  std::lock_guard lock(m_);
  return q_.size();
}

WorkerState::WorkerState(int id_, const Dataset& data_, RowBlock block_, int K_,
                         std::uint64_t seed)
    : id(id_),
      block(block_),
      data(&data_),
      K(K_),
      route_rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(id_ + 1))) {
  const std::size_t n = block.size();
  aux.g.assign(n, 0.0);
  aux.a.assign(n * static_cast<std::size_t>(K), 0.0);
  aux.linear_partial.assign(n, 0.0);
  aux.sumsq_partial.assign(n * static_cast<std::size_t>(K), 0.0);

  cols.resize(static_cast<std::size_t>(data->D) + 1);
  for (std::size_t li = 0; li < n; ++li) {
    cols[0].emplace_back(static_cast<std::uint32_t>(li), 1.0);
    for (const Feature& f : data->examples[block.begin + li].features) {
      if (f.index < 1 || f.index > data->D) {
        throw std::invalid_argument("example feature index " + std::to_string(f.index) +
                                    " outside [1, " + std::to_string(data->D) + "]");
      }
      cols[static_cast<std::size_t>(f.index)].emplace_back(static_cast<std::uint32_t>(li),
                                                           f.value);
    }
  }
}

void WorkerState::begin_phase(int e, Phase ph) {
  epoch = e;
  phase = ph;
  if (ph == Phase::update) {
    updates_done = 0;
  } else {
    rounds_done = 0;
    std::fill(aux.a.begin(), aux.a.end(), 0.0);
    std::fill(aux.linear_partial.begin(), aux.linear_partial.end(), 0.0);
    std::fill(aux.sumsq_partial.begin(), aux.sumsq_partial.end(), 0.0);
  }
  for (auto it = deferred.rbegin(); it != deferred.rend(); ++it) {
    if (it->epoch != e || it->phase != ph) {
      throw std::logic_error("deferred token does not belong to the next phase");
    }
    inbox.push_front(std::move(*it));
  }
  deferred.clear();
}

void worker_update_step(WorkerState& w, ParamToken& token, const Hyperparams& hyper,
                        double eta, bool local_a_refresh) {
  if (token.phase != Phase::update || token.epoch != w.epoch) {
    throw std::logic_error("update step on a token from another phase");
  }
  const auto& col = w.cols[static_cast<std::size_t>(token.dim)];

  if (token.dim == 0) {
    // bias: w0 <- w0 - eta * G_i per local example, unregularized
    for (const auto& [li, x] : col) {
      (void)x;
      token.w -= eta * w.aux.g[li];
    }
    w.w0_replica = token.w;
    ++w.updates_done;
    return;
  }

  const int K = static_cast<int>(token.v.size());
  for (const auto& [li, x] : col) {
    const double g = w.aux.g[li];
    token.w -= eta * grad_wj(g, x, token.w, hyper.lambda_w);
    double* a_row = w.aux.a.data() + static_cast<std::size_t>(li) * w.K;
    for (int k = 0; k < K; ++k) {
      double& vjk = token.v[static_cast<std::size_t>(k)];
      const double v_old = vjk;
      vjk -= eta * grad_vjk(g, x, a_row[k], vjk, hyper.lambda_v);
      if (local_a_refresh) {
        a_row[k] += (vjk - v_old) * x;
      }
    }
  }
  ++w.updates_done;
}

void worker_accumulate_step(WorkerState& w, const ParamToken& token) {
  if (token.phase != Phase::accumulate || token.epoch != w.epoch) {
    throw std::logic_error("accumulate step on a token from another phase");
  }
  const auto& col = w.cols[static_cast<std::size_t>(token.dim)];

  if (token.dim == 0) {
    for (const auto& [li, x] : col) {
      (void)x;
      w.aux.linear_partial[li] += token.w;
    }
    w.w0_replica = token.w;
    ++w.rounds_done;
    return;
  }

  const int K = static_cast<int>(token.v.size());
  for (const auto& [li, x] : col) {
    w.aux.linear_partial[li] += token.w * x;
    double* a_row = w.aux.a.data() + static_cast<std::size_t>(li) * w.K;
    double* s_row = w.aux.sumsq_partial.data() + static_cast<std::size_t>(li) * w.K;
    for (int k = 0; k < K; ++k) {
      const double vx = token.v[static_cast<std::size_t>(k)] * x;
      a_row[k] += vx;
      s_row[k] += vx * vx;
    }
  }
  ++w.rounds_done;
}

void finalize_aux(WorkerState& w, LossKind loss) {
  if (w.rounds_done != static_cast<int>(w.cols.size())) {
    throw std::logic_error("finalize_aux called before the accumulate phase completed");
  }
  const std::size_t K = static_cast<std::size_t>(w.K);
  for (std::size_t li = 0; li < w.local_n(); ++li) {
    double pair = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = w.aux.a[li * K + k];
      pair += a * a - w.aux.sumsq_partial[li * K + k];
    }
    const double f = w.aux.linear_partial[li] + 0.5 * pair;
    w.aux.g[li] = loss_multiplier(loss, f, w.local_label(li));
    w.aux.linear_partial[li] = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      w.aux.sumsq_partial[li * K + k] = 0.0;
    }
  }
}

int next_queue(int worker_id, int P, RoutingPolicy policy, std::mt19937_64& rng) {
  if (P == 1) return 0;
  if (policy == RoutingPolicy::ring) {
    return (worker_id + 1) % P;
  }
  std::uniform_int_distribution<int> pick(0, P - 2);
  const int q = pick(rng);
  return q >= worker_id ? q + 1 : q;
}

namespace {

using Workers = std::vector<std::unique_ptr<WorkerState>>;

struct PhaseRun {
  Workers* workers = nullptr;
  const EngineConfig* config = nullptr;
  double eta = 0.0;
  int P = 0;
  std::size_t target = 0;  // P * (D+1) processed visits complete the phase
  std::atomic<std::size_t> visits{0};
};

void advance_token(ParamToken& token) {
  token.visited_mask = 0;
  if (token.phase == Phase::update) {
    token.phase = Phase::accumulate;
  } else {
    token.phase = Phase::update;
    ++token.epoch;
  }
}

void forward(PhaseRun& run, WorkerState& w, ParamToken token) {
  const int q = next_queue(w.id, run.P, run.config->routing, w.route_rng);
  (*run.workers)[static_cast<std::size_t>(q)]->inbox.push(std::move(token));
}

void handle_token(PhaseRun& run, WorkerState& w, ParamToken token) {
  if (token.epoch != w.epoch || token.phase != w.phase) {
    // Arrived ahead of this worker's phase; parked until the phase flips.
    w.deferred.push_back(std::move(token));
    return;
  }
  const std::uint64_t bit = 1ULL << static_cast<unsigned>(w.id);
  if (token.visited_mask & bit) {
    // Random routing can hand a token back before the phase is over; relay.
    forward(run, w, std::move(token));
    return;
  }
  if (w.phase == Phase::update) {
    worker_update_step(w, token, run.config->hyper, run.eta, run.config->local_a_refresh);
  } else {
    worker_accumulate_step(w, token);
  }
  token.visited_mask |= bit;
  if (std::popcount(token.visited_mask) == run.P) {
    advance_token(token);
  }
  forward(run, w, std::move(token));
  run.visits.fetch_add(1, std::memory_order_release);
}

void run_phase_deterministic(PhaseRun& run) {
  while (run.visits.load(std::memory_order_relaxed) < run.target) {
    bool progressed = false;
    for (auto& wp : *run.workers) {
      if (run.visits.load(std::memory_order_relaxed) >= run.target) break;
      if (auto token = wp->inbox.try_pop()) {
        handle_token(run, *wp, std::move(*token));
        progressed = true;
      }
    }
    if (!progressed) {
      throw std::runtime_error("engine stalled: no worker holds a processable token");
    }
  }
}

void run_phase_threaded(PhaseRun& run) {
  std::vector<std::thread> threads;
  threads.reserve(run.workers->size());
  std::atomic<bool> failed{false};
  for (auto& wp : *run.workers) {
    threads.emplace_back([&run, &failed, w = wp.get()] {
      try {
        while (run.visits.load(std::memory_order_acquire) < run.target &&
               !failed.load(std::memory_order_relaxed)) {
          if (auto token = w->inbox.pop_for(std::chrono::microseconds(200))) {
            handle_token(run, *w, std::move(*token));
          }
        }
      } catch (...) {
        failed.store(true, std::memory_order_relaxed);
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (failed.load()) {
    throw std::runtime_error("worker failed during a phase");
  }
}

void run_phase(PhaseRun& run) {
  if (run.config->deterministic) {
    run_phase_deterministic(run);
  } else {
    run_phase_threaded(run);
  }
}

// Reads every token at a quiescent point and assembles the global model,
// checking that each dimension is present exactly once.
FMModel snapshot_model(const Workers& workers, int D, int K) {
  FMModel m = FMModel::zeros(D, K);
  std::vector<char> seen(static_cast<std::size_t>(D) + 1, 0);
  std::size_t count = 0;
  auto read = [&](const ParamToken& t) {
    if (t.dim < 0 || t.dim > D || seen[static_cast<std::size_t>(t.dim)]) {
      throw std::logic_error("token conservation violated at epoch barrier");
    }
    seen[static_cast<std::size_t>(t.dim)] = 1;
    ++count;
    if (t.dim == 0) {
      m.w0 = t.w;
    } else {
      m.wj(t.dim) = t.w;
      for (int k = 0; k < K; ++k) {
        m.vjk(t.dim, k) = t.v[static_cast<std::size_t>(k)];
      }
    }
  };
  for (const auto& wp : workers) {
    wp->inbox.for_each(read);
    for (const ParamToken& t : wp->deferred) read(t);
  }
  if (count != static_cast<std::size_t>(D) + 1) {
    throw std::logic_error("token conservation violated: some dimensions are missing");
  }
  return m;
}

void validate(const EngineConfig& config, const Dataset& train) {
  if (config.workers < 1 || config.workers > 64) {
    throw std::invalid_argument("workers must be in [1, 64]");
  }
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config.K < 1) throw std::invalid_argument("K must be >= 1");
  if (!(config.hyper.eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(config.hyper.decay > 0.0 && config.hyper.decay <= 1.0)) {
    throw std::invalid_argument("decay must be in (0, 1]");
  }
  if (config.hyper.lambda_w < 0.0 || config.hyper.lambda_v < 0.0) {
    throw std::invalid_argument("regularization strengths must be >= 0");
  }
  if (config.init_sd < 0.0) throw std::invalid_argument("init_sd must be >= 0");
  if (train.empty()) throw std::invalid_argument("training set is empty");
}

}  // namespace

std::pair<FMModel, TrainTrace> run_dsfacto(const EngineConfig& config, const Dataset& train,
                                           const Dataset* test,
                                           const EpochObserver& observer) {
  validate(config, train);
  FMModel model = init_model(train.D, config.K, config.seed, config.init_sd);
  TrainTrace trace;
  if (config.epochs == 0) {
    return {std::move(model), std::move(trace)};
  }

  const int P = config.workers;
  const int D = train.D;
  const std::size_t visits_per_phase =
      static_cast<std::size_t>(P) * (static_cast<std::size_t>(D) + 1);

  Workers workers;
  workers.reserve(static_cast<std::size_t>(P));
  for (const RowBlock& block : partition_rows(train.size(), P)) {
    workers.push_back(
        std::make_unique<WorkerState>(block.worker_id, train, block, config.K, config.seed));
  }

  // Tokens start in the initial accumulate pass that populates g and a.
  auto queues = make_tokens(model, P, config.seed);
  for (int p = 0; p < P; ++p) {
    for (ParamToken& token : queues[static_cast<std::size_t>(p)]) {
      token.epoch = 0;
      token.phase = Phase::accumulate;
      workers[static_cast<std::size_t>(p)]->inbox.push(std::move(token));
    }
  }

  PhaseRun run;
  run.workers = &workers;
  run.config = &config;
  run.P = P;
  run.target = visits_per_phase;

  auto start_phase = [&](int epoch, Phase phase) {
    for (auto& wp : workers) wp->begin_phase(epoch, phase);
    run.visits.store(0, std::memory_order_relaxed);
  };
  auto check_counters = [&](Phase phase) {
    for (const auto& wp : workers) {
      const int done = phase == Phase::update ? wp->updates_done : wp->rounds_done;
      if (done != D + 1) {
        throw std::logic_error("visit completeness violated: worker " +
                               std::to_string(wp->id) + " processed " +
                               std::to_string(done) + " of " + std::to_string(D + 1));
      }
    }
  };

  start_phase(0, Phase::accumulate);
  run_phase(run);
  check_counters(Phase::accumulate);
  for (auto& wp : workers) finalize_aux(*wp, config.hyper.loss);
  if (observer) observer(0, snapshot_model(workers, D, config.K), workers);

  double eta = config.hyper.eta;
  double elapsed = 0.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    run.eta = eta;
    const auto t0 = std::chrono::steady_clock::now();

    start_phase(epoch, Phase::update);
    run_phase(run);
    check_counters(Phase::update);

    start_phase(epoch, Phase::accumulate);
    run_phase(run);
    check_counters(Phase::accumulate);
    for (auto& wp : workers) finalize_aux(*wp, config.hyper.loss);

    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    FMModel snap = snapshot_model(workers, D, config.K);
    if (observer) observer(epoch, snap, workers);

    TraceRow row;
    row.epoch = epoch;
    row.elapsed_secs = elapsed;
    if (config.eval_per_epoch) {
      row.objective = objective(snap, train, config.hyper);
      row.train_metric = evaluate(snap, train);
      if (test && !test->empty()) {
        row.test_metric = evaluate(snap, *test);
      }
    }
    trace.push_back(row);

    eta *= config.hyper.decay;
  }

  return {snapshot_model(workers, D, config.K), std::move(trace)};
}

}  // namespace dsfacto
