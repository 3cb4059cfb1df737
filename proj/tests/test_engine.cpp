#include <doctest.h>

#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "dsfacto/data_io.hpp"
#include "dsfacto/engine.hpp"
#include "dsfacto/fm.hpp"
#include "dsfacto/serial.hpp"
#include "test_util.hpp"

using namespace dsfacto;
using testutil::make_example;

namespace {

Dataset synth_regression(int n, int d, int k, unsigned seed, double density = 0.4) {
  SynthSpec spec;
  spec.N = n;
  spec.D = d;
  spec.K = k;
  spec.density = density;
  spec.noise_sd = 0.1;
  spec.seed = seed;
  return synth_fm(spec).first;
}

ParamToken feature_token(int dim, double w, std::vector<double> v, int epoch, Phase phase) {
  ParamToken t;
  t.dim = dim;
  t.w = w;
  t.v = std::move(v);
  t.epoch = epoch;
  t.phase = phase;
  return t;
}

double max_coord_diff(const FMModel& a, const FMModel& b) {
  double worst = std::abs(a.w0 - b.w0);
  for (std::size_t i = 0; i < a.w.size(); ++i) {
    worst = std::max(worst, std::abs(a.w[i] - b.w[i]));
  }
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    worst = std::max(worst, std::abs(a.v[i] - b.v[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("next_queue") {
  std::mt19937_64 rng(1);
  CHECK(next_queue(3, 4, RoutingPolicy::ring, rng) == 0);
  CHECK(next_queue(0, 4, RoutingPolicy::ring, rng) == 1);
  CHECK(next_queue(0, 1, RoutingPolicy::ring, rng) == 0);
  CHECK(next_queue(0, 1, RoutingPolicy::random, rng) == 0);
  for (int trial = 0; trial < 20; ++trial) {
    CHECK(next_queue(0, 2, RoutingPolicy::random, rng) == 1);
    CHECK(next_queue(1, 2, RoutingPolicy::random, rng) == 0);
  }
  for (int trial = 0; trial < 50; ++trial) {
    int q = next_queue(2, 5, RoutingPolicy::random, rng);
    CHECK(q >= 0);
    CHECK(q < 5);
    CHECK(q != 2);
  }
}

TEST_CASE("worker_update_step applies the stochastic updates from stored g and a") {
  Dataset ds;
  ds.D = 2;
  ds.examples = {make_example({{1, 1.0}}, 1.0)};
  WorkerState w(0, ds, {0, 0, 1}, 1, 7);
  w.epoch = 1;
  w.phase = Phase::update;
  w.aux.g[0] = 1.0;
  w.aux.a[0] = 3.0;

  Hyperparams hp;
  hp.lambda_w = 0.1;
  hp.lambda_v = 0.2;

  ParamToken tok = feature_token(1, 2.0, {1.0}, 1, Phase::update);
  worker_update_step(w, tok, hp, 0.5, false);
  // w: 2 - 0.5*(1*1 + 0.1*2) = 1.4; v: 1 - 0.5*(1*(3 - 1) + 0.2*1) = -0.1
  CHECK(tok.w == doctest::Approx(1.4));
  CHECK(tok.v[0] == doctest::Approx(-0.1));
  CHECK(w.updates_done == 1);
}

TEST_CASE("worker_update_step skips dimensions with no local nonzeros") {
  Dataset ds;
  ds.D = 3;
  ds.examples = {make_example({{1, 2.0}}, 1.0)};
  WorkerState w(0, ds, {0, 0, 1}, 2, 7);
  w.epoch = 1;
  w.phase = Phase::update;
  w.aux.g[0] = 5.0;

  Hyperparams hp;
  hp.lambda_w = 0.5;
  hp.lambda_v = 0.5;
  ParamToken tok = feature_token(3, 1.25, {0.5, -0.5}, 1, Phase::update);
  worker_update_step(w, tok, hp, 0.1, false);
  CHECK(tok.w == 1.25);
  CHECK(tok.v == std::vector<double>{0.5, -0.5});
  CHECK(w.updates_done == 1);
}

TEST_CASE("worker_update_step with eta = 0 leaves the token unchanged") {
  Dataset ds;
  ds.D = 1;
  ds.examples = {make_example({{1, 1.5}}, 1.0)};
  WorkerState w(0, ds, {0, 0, 1}, 1, 7);
  w.epoch = 1;
  w.phase = Phase::update;
  w.aux.g[0] = 2.0;
  Hyperparams hp;
  ParamToken tok = feature_token(1, 0.75, {0.25}, 1, Phase::update);
  worker_update_step(w, tok, hp, 0.0, false);
  CHECK(tok.w == 0.75);
  CHECK(tok.v[0] == 0.25);
}

TEST_CASE("worker_update_step handles the bias token") {
  Dataset ds;
  ds.D = 1;
  ds.examples = {make_example({{1, 1.0}}, 1.0), make_example({}, 2.0)};
  WorkerState w(0, ds, {0, 0, 2}, 1, 7);
  w.epoch = 1;
  w.phase = Phase::update;
  w.aux.g = {0.5, -0.25};
  Hyperparams hp;
  hp.lambda_w = 10.0;  // must not touch the bias
  ParamToken bias = feature_token(0, 1.0, {}, 1, Phase::update);
  worker_update_step(w, bias, hp, 1.0, false);
  CHECK(bias.w == doctest::Approx(1.0 - 0.5 + 0.25));
  CHECK(w.w0_replica == bias.w);
}

TEST_CASE("worker_update_step rejects phase mismatch") {
  Dataset ds;
  ds.D = 1;
  ds.examples = {make_example({{1, 1.0}}, 1.0)};
  WorkerState w(0, ds, {0, 0, 1}, 1, 7);
  w.epoch = 1;
  w.phase = Phase::update;
  Hyperparams hp;
  ParamToken tok = feature_token(1, 0.0, {0.0}, 1, Phase::accumulate);
  CHECK_THROWS_AS(worker_update_step(w, tok, hp, 0.1, false), std::logic_error);
  ParamToken wrong_epoch = feature_token(1, 0.0, {0.0}, 2, Phase::update);
  CHECK_THROWS_AS(worker_update_step(w, wrong_epoch, hp, 0.1, false), std::logic_error);
}

TEST_CASE("accumulate + finalize reproduce fm-core scores") {
  std::mt19937_64 rng(31);
  Dataset ds;
  ds.D = 8;
  ds.task = Task::regression;
  for (int i = 0; i < 6; ++i) {
    ds.examples.push_back(testutil::random_example(8, 0.6, rng, 0.3 * i - 1.0));
  }
  ds.examples.push_back(make_example({}, 1.0));  // all-zeros row: f must be w0
  FMModel m = testutil::random_model(8, 3, rng);

  WorkerState w(0, ds, {0, 0, ds.size()}, 3, 7);
  w.epoch = 1;
  w.phase = Phase::accumulate;

  for (int dim = 0; dim <= ds.D; ++dim) {
    ParamToken tok;
    tok.dim = dim;
    tok.epoch = 1;
    tok.phase = Phase::accumulate;
    if (dim == 0) {
      tok.w = m.w0;
    } else {
      tok.w = m.wj(dim);
      tok.v.assign(m.v.begin() + (dim - 1) * 3, m.v.begin() + dim * 3);
    }
    worker_accumulate_step(w, tok);
  }
  CHECK(w.rounds_done == ds.D + 1);

  // f for the all-zeros example is exactly w0 before finalize consumes it
  CHECK(w.aux.linear_partial[6] == m.w0);

  finalize_aux(w, LossKind::squared);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double f_ref = score(m, ds.examples[i]);
    const double g_ref = loss_multiplier(LossKind::squared, f_ref, ds.examples[i].label);
    CHECK(std::abs(w.aux.g[i] - g_ref) <= 1e-12 * (1.0 + std::abs(g_ref)));
    auto a_ref = compute_a(m, ds.examples[i]);
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(w.aux.a[i * 3 + k] - a_ref[k]) <= 1e-12 * (1.0 + std::abs(a_ref[k])));
    }
  }
  // partials are reset for the next epoch
  for (double lp : w.aux.linear_partial) CHECK(lp == 0.0);
  for (double sq : w.aux.sumsq_partial) CHECK(sq == 0.0);
}

TEST_CASE("accumulate with a dimension absent locally leaves aux unchanged") {
  Dataset ds;
  ds.D = 4;
  ds.examples = {make_example({{1, 1.0}}, 0.0)};
  WorkerState w(0, ds, {0, 0, 1}, 2, 7);
  w.epoch = 1;
  w.phase = Phase::accumulate;
  ParamToken tok = feature_token(3, 9.0, {9.0, 9.0}, 1, Phase::accumulate);
  worker_accumulate_step(w, tok);
  CHECK(w.aux.linear_partial[0] == 0.0);
  CHECK(w.aux.a == std::vector<double>{0.0, 0.0});
  CHECK(w.rounds_done == 1);
}

TEST_CASE("finalize_aux on the zero model gives G = -y/2 under logistic loss") {
  Dataset ds;
  ds.D = 2;
  ds.task = Task::classification;
  ds.examples = {make_example({{1, 1.0}}, 1.0), make_example({{2, 1.0}}, -1.0)};
  WorkerState w(0, ds, {0, 0, 2}, 1, 7);
  w.epoch = 0;
  w.phase = Phase::accumulate;
  for (int dim = 0; dim <= 2; ++dim) {
    ParamToken tok;
    tok.dim = dim;
    tok.epoch = 0;
    tok.phase = Phase::accumulate;
    if (dim > 0) tok.v.assign(1, 0.0);
    worker_accumulate_step(w, tok);
  }
  finalize_aux(w, LossKind::logistic);
  CHECK(w.aux.g[0] == doctest::Approx(-0.5));
  CHECK(w.aux.g[1] == doctest::Approx(0.5));
}

TEST_CASE("finalize_aux rejects an incomplete phase") {
  Dataset ds;
  ds.D = 3;
  ds.examples = {make_example({{1, 1.0}}, 0.0)};
  WorkerState w(0, ds, {0, 0, 1}, 1, 7);
  w.epoch = 0;
  w.phase = Phase::accumulate;
  CHECK_THROWS_AS(finalize_aux(w, LossKind::squared), std::logic_error);
}

TEST_CASE("run_dsfacto with zero epochs returns the initialized model") {
  Dataset ds = synth_regression(20, 6, 2, 3);
  EngineConfig cfg;
  cfg.workers = 2;
  cfg.K = 2;
  cfg.epochs = 0;
  cfg.seed = 11;
  auto [model, trace] = run_dsfacto(cfg, ds, nullptr);
  CHECK(trace.empty());
  FMModel expected = init_model(ds.D, 2, 11, cfg.init_sd);
  CHECK(max_coord_diff(model, expected) == 0.0);
}

TEST_CASE("engine P=1 deterministic matches serial incremental with bulk refresh") {
  Dataset ds = synth_regression(60, 12, 3, 21);
  const int epochs = 5;

  EngineConfig cfg;
  cfg.workers = 1;
  cfg.K = 3;
  cfg.epochs = epochs;
  cfg.hyper.eta = 0.02;
  cfg.hyper.lambda_w = 0.01;
  cfg.hyper.lambda_v = 0.01;
  cfg.hyper.decay = 0.9;
  cfg.seed = 5;
  cfg.deterministic = true;
  auto [engine_model, trace] = run_dsfacto(cfg, ds, nullptr);

  FMModel serial = init_model(ds.D, 3, 5, cfg.init_sd);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Hyperparams hyper = cfg.hyper;
  for (int e = 0; e < epochs; ++e) {
    incremental_epoch(serial, ds, hyper, order, ds.size());
    hyper.eta *= hyper.decay;
  }
  CHECK(max_coord_diff(engine_model, serial) <= 1e-12);
}

TEST_CASE("engine threaded P=1 equals deterministic P=1") {
  Dataset ds = synth_regression(40, 10, 2, 23);
  EngineConfig cfg;
  cfg.workers = 1;
  cfg.K = 2;
  cfg.epochs = 4;
  cfg.hyper.eta = 0.03;
  cfg.seed = 9;
  cfg.deterministic = true;
  auto [det, t1] = run_dsfacto(cfg, ds, nullptr);
  cfg.deterministic = false;
  auto [thr, t2] = run_dsfacto(cfg, ds, nullptr);
  CHECK(max_coord_diff(det, thr) == 0.0);
}

TEST_CASE("engine is deterministic across runs for fixed seed and ring routing") {
  Dataset ds = synth_regression(50, 9, 2, 29);
  EngineConfig cfg;
  cfg.workers = 3;
  cfg.K = 2;
  cfg.epochs = 3;
  cfg.hyper.eta = 0.02;
  cfg.seed = 13;
  auto [m1, t1] = run_dsfacto(cfg, ds, nullptr);
  auto [m2, t2] = run_dsfacto(cfg, ds, nullptr);
  CHECK(max_coord_diff(m1, m2) == 0.0);
  REQUIRE(t1.size() == t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].objective == t2[i].objective);
  }
}

TEST_CASE("aux freshness at every epoch barrier (P=2, threaded)") {
  Dataset ds = synth_regression(40, 8, 2, 37);
  EngineConfig cfg;
  cfg.workers = 2;
  cfg.K = 2;
  cfg.epochs = 3;
  cfg.hyper.eta = 0.05;
  cfg.hyper.loss = LossKind::squared;
  cfg.seed = 17;

  int barriers = 0;
  EpochObserver obs = [&](int, const FMModel& snap,
                          const std::vector<std::unique_ptr<WorkerState>>& workers) {
    ++barriers;
    for (const auto& wp : workers) {
      for (std::size_t li = 0; li < wp->local_n(); ++li) {
        const SparseExample& x = ds.examples[wp->block.begin + li];
        const double g_ref = loss_multiplier(cfg.hyper.loss, score(snap, x), x.label);
        CHECK(std::abs(wp->aux.g[li] - g_ref) <= 1e-12 * (1.0 + std::abs(g_ref)));
        const auto a_ref = compute_a(snap, x);
        for (int k = 0; k < cfg.K; ++k) {
          CHECK(std::abs(wp->aux.a[li * cfg.K + k] - a_ref[k]) <=
                1e-12 * (1.0 + std::abs(a_ref[k])));
        }
      }
    }
  };
  run_dsfacto(cfg, ds, nullptr, obs);
  CHECK(barriers == 4);  // initial accumulate pass + 3 epochs
}

TEST_CASE("multi-worker runs land near the single-worker objective") {
  // Stale-g updates compound over a coordinate's examples within an epoch,
  // so eta must stay below ~2/(N * density) for squared loss.
  Dataset ds = synth_regression(120, 15, 3, 41);
  EngineConfig cfg;
  cfg.workers = 1;
  cfg.K = 3;
  cfg.epochs = 8;
  cfg.hyper.eta = 0.002;
  cfg.hyper.decay = 0.95;
  cfg.hyper.lambda_w = 1e-4;
  cfg.hyper.lambda_v = 1e-4;
  cfg.seed = 19;
  auto [m1, t1] = run_dsfacto(cfg, ds, nullptr);
  const double obj1 = t1.back().objective;
  for (int p : {2, 4}) {
    cfg.workers = p;
    auto [mp, tp] = run_dsfacto(cfg, ds, nullptr);
    CHECK(std::abs(tp.back().objective - obj1) <= 0.05 * std::abs(obj1));
  }
}

TEST_CASE("random routing completes and stays consistent") {
  Dataset ds = synth_regression(60, 10, 2, 43);
  EngineConfig cfg;
  cfg.workers = 3;
  cfg.K = 2;
  cfg.epochs = 3;
  cfg.hyper.eta = 0.02;
  cfg.seed = 23;
  cfg.routing = RoutingPolicy::random;

  // watchdog: the run must terminate well within the timeout
  auto fut = std::async(std::launch::async, [&] { return run_dsfacto(cfg, ds, nullptr); });
  REQUIRE(fut.wait_for(std::chrono::seconds(60)) == std::future_status::ready);
  auto [model, trace] = fut.get();
  REQUIRE(trace.size() == 3);
  CHECK(std::isfinite(trace.back().objective));
}

TEST_CASE("local_a_refresh variant still trains") {
  Dataset ds = synth_regression(60, 10, 2, 47);
  EngineConfig cfg;
  cfg.workers = 2;
  cfg.K = 2;
  cfg.epochs = 5;
  cfg.hyper.eta = 0.02;
  cfg.seed = 27;
  cfg.local_a_refresh = true;
  auto [model, trace] = run_dsfacto(cfg, ds, nullptr);
  REQUIRE(trace.size() == 5);
  CHECK(trace.back().objective < trace.front().objective);
}

TEST_CASE("engine validates its configuration") {
  Dataset ds = synth_regression(10, 4, 2, 53);
  EngineConfig cfg;
  cfg.K = 2;
  cfg.epochs = 1;

  cfg.workers = 0;
  CHECK_THROWS_AS(run_dsfacto(cfg, ds, nullptr), std::invalid_argument);
  cfg.workers = 1;
  cfg.hyper.eta = 0.0;
  CHECK_THROWS_AS(run_dsfacto(cfg, ds, nullptr), std::invalid_argument);
  cfg.hyper.eta = 0.1;
  cfg.hyper.decay = 0.0;
  CHECK_THROWS_AS(run_dsfacto(cfg, ds, nullptr), std::invalid_argument);
  cfg.hyper.decay = 1.0;
  cfg.workers = 11;  // > N
  CHECK_THROWS_AS(run_dsfacto(cfg, ds, nullptr), std::invalid_argument);

  Dataset empty;
  empty.D = 4;
  cfg.workers = 1;
  CHECK_THROWS_AS(run_dsfacto(cfg, empty, nullptr), std::invalid_argument);
}

TEST_CASE("trace rows carry epochs, metrics and a test column when given") {
  Dataset ds = synth_regression(50, 8, 2, 59);
  auto [train, test] = split(ds, 0.2, 3);
  EngineConfig cfg;
  cfg.workers = 2;
  cfg.K = 2;
  cfg.epochs = 4;
  cfg.hyper.eta = 0.02;
  cfg.seed = 31;
  auto [model, trace] = run_dsfacto(cfg, train, &test);
  REQUIRE(trace.size() == 4);
  for (int e = 0; e < 4; ++e) {
    CHECK(trace[e].epoch == e + 1);
    CHECK(trace[e].test_metric.has_value());
    CHECK(std::isfinite(trace[e].objective));
  }
  CHECK(trace.back().elapsed_secs >= trace.front().elapsed_secs);
}
