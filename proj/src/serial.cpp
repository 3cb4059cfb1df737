#include "dsfacto/serial.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "dsfacto/fm.hpp"
#include "dsfacto/metrics.hpp"

namespace dsfacto {

namespace {

void check_dims(const FMModel& model, const Dataset& train) {
  if (model.D != train.D) {
    throw std::invalid_argument("model dimensionality " + std::to_string(model.D) +
                                " does not match dataset D = " + std::to_string(train.D));
  }
  if (train.empty()) {
    throw std::invalid_argument("training set is empty");
  }
}

// Stored synchronization terms for the stale-update path.
struct BulkAux {
  std::vector<double> g;  // N
  std::vector<double> a;  // N x K row-major
};

void refresh_bulk(const FMModel& model, const Dataset& train, LossKind loss, BulkAux& aux) {
  const std::size_t n = train.size();
  const std::size_t k = static_cast<std::size_t>(model.K);
  aux.g.resize(n);
  aux.a.resize(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const SparseExample& x = train.examples[i];
    aux.g[i] = loss_multiplier(loss, score(model, x), x.label);
    std::vector<double> ai = compute_a(model, x);
    std::copy(ai.begin(), ai.end(), aux.a.begin() + i * k);
  }
}

}  // namespace

void batch_epoch(FMModel& model, const Dataset& train, const Hyperparams& hyper) {
  check_dims(model, train);
  const auto n = static_cast<double>(train.size());
  const int K = model.K;

  double grad_w0 = 0.0;
  std::vector<double> grad_w(model.w.size(), 0.0);
  std::vector<double> grad_v(model.v.size(), 0.0);

  for (const SparseExample& x : train.examples) {
    const double g = loss_multiplier(hyper.loss, score(model, x), x.label);
    const std::vector<double> a = compute_a(model, x);
    grad_w0 += g;
    for (const Feature& f : x.features) {
      const std::size_t j0 = static_cast<std::size_t>(f.index - 1);
      grad_w[j0] += g * f.value;
      for (int k = 0; k < K; ++k) {
        const double vjk = model.v[j0 * K + k];
        grad_v[j0 * K + k] += g * (f.value * a[k] - vjk * f.value * f.value);
      }
    }
  }

  model.w0 -= hyper.eta * (grad_w0 / n);
  for (std::size_t j0 = 0; j0 < model.w.size(); ++j0) {
    model.w[j0] -= hyper.eta * (grad_w[j0] / n + hyper.lambda_w * model.w[j0]);
  }
  for (std::size_t idx = 0; idx < model.v.size(); ++idx) {
    model.v[idx] -= hyper.eta * (grad_v[idx] / n + hyper.lambda_v * model.v[idx]);
  }
}

void incremental_epoch(FMModel& model, const Dataset& train, const Hyperparams& hyper,
                       std::span<const std::size_t> order, std::size_t refresh_period) {
  check_dims(model, train);
  const std::size_t n = train.size();
  if (order.size() != n) {
    throw std::invalid_argument("visit order must have one entry per training example");
  }
  {
    std::vector<bool> seen(n, false);
    for (std::size_t i : order) {
      if (i >= n || seen[i]) {
        throw std::invalid_argument("visit order is not a permutation");
      }
      seen[i] = true;
    }
  }
  if (refresh_period < 1) {
    throw std::invalid_argument("refresh_period must be >= 1");
  }

  const int K = model.K;
  const bool bulk = refresh_period > 1;
  BulkAux aux;

  std::vector<double> a_fresh;
  for (std::size_t visit = 0; visit < n; ++visit) {
    if (bulk && visit % refresh_period == 0) {
      refresh_bulk(model, train, hyper.loss, aux);
    }
    const std::size_t i = order[visit];
    const SparseExample& x = train.examples[i];

    double g;
    const double* a;
    if (bulk) {
      g = aux.g[i];
      a = aux.a.data() + i * static_cast<std::size_t>(K);
    } else {
      g = loss_multiplier(hyper.loss, score(model, x), x.label);
      a_fresh = compute_a(model, x);
      a = a_fresh.data();
    }

    model.w0 -= hyper.eta * g;
    for (const Feature& f : x.features) {
      const std::size_t j0 = static_cast<std::size_t>(f.index - 1);
      model.w[j0] -= hyper.eta * grad_wj(g, f.value, model.w[j0], hyper.lambda_w);
      for (int k = 0; k < K; ++k) {
        double& vjk = model.v[j0 * K + k];
        vjk -= hyper.eta * grad_vjk(g, f.value, a[k], vjk, hyper.lambda_v);
      }
    }
  }
}

std::pair<FMModel, TrainTrace> train_serial(const SerialConfig& config, const Dataset& train,
                                            const Dataset* test) {
  if (config.epochs < 0 || config.K < 1) {
    throw std::invalid_argument("train_serial requires epochs >= 0 and K >= 1");
  }
  FMModel model = init_model(train.D, config.K, config.seed, config.init_sd);
  TrainTrace trace;
  if (config.epochs == 0) {
    return {std::move(model), std::move(trace)};
  }

  std::mt19937_64 shuffle_rng(config.seed + 0x517cc1b727220a95ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Hyperparams hyper = config.hyper;
  double elapsed = 0.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.mode == SerialMode::batch) {
      batch_epoch(model, train, hyper);
    } else {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      incremental_epoch(model, train, hyper, order, 1);
    }
    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    TraceRow row;
    row.epoch = epoch;
    row.objective = objective(model, train, hyper);
    row.elapsed_secs = elapsed;
    row.train_metric = evaluate(model, train);
    if (test && !test->empty()) {
      row.test_metric = evaluate(model, *test);
    }
    trace.push_back(row);

    hyper.eta *= hyper.decay;
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace dsfacto
