#include "dsfacto/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "dsfacto/config.hpp"
#include "dsfacto/data_io.hpp"
#include "dsfacto/engine.hpp"
#include "dsfacto/fm.hpp"
#include "dsfacto/metrics.hpp"
#include "dsfacto/serial.hpp"

namespace dsfacto::cli {

namespace {

std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct TrainArgs {
  RunConfig config;
  std::string mode = "dsfacto";
  std::string task = "regression";
  std::string loss;  // defaults to the task's natural loss
  std::string routing = "ring";
};

struct SynthArgs {
  SynthSpec spec;
  std::string task = "regression";
  std::string out_path;
};

struct BenchArgs {
  std::string train_path;
  std::string task = "regression";
  std::string loss;
  std::string routing = "ring";
  int synth_n = 0;
  int synth_d = 0;
  double density = 0.05;
  double noise_sd = 0.1;
  int K = 4;
  int epochs = 3;
  double eta = 0.001;
  double decay = 1.0;
  double lambda_w = 0.0;
  double lambda_v = 0.0;
  double init_sd = 0.01;
  std::uint64_t seed = 1;
  std::vector<int> workers = {1, 2, 4, 8};
  std::string out_path;
};

int execute_train(TrainArgs& args) {
  RunConfig& cfg = args.config;
  cfg.mode = parse_run_mode(args.mode);
  cfg.task = parse_task(args.task);
  cfg.loss = args.loss.empty()
                 ? (cfg.task == Task::classification ? LossKind::logistic : LossKind::squared)
                 : parse_loss(args.loss);
  cfg.routing = parse_routing(args.routing);
  cfg.validate();

  Dataset train = load_libsvm(cfg.train_path, cfg.task, cfg.force_D);
  std::optional<Dataset> test;
  if (!cfg.test_path.empty()) {
    test = load_libsvm(cfg.test_path, cfg.task, train.D);
  }
  const Dataset* test_ptr = test ? &*test : nullptr;

  FMModel model;
  TrainTrace trace;
  if (cfg.mode == RunMode::dsfacto) {
    EngineConfig ec;
    ec.workers = cfg.workers;
    ec.K = cfg.K;
    ec.epochs = cfg.epochs;
    ec.hyper = cfg.hyper();
    ec.init_sd = cfg.init_sd;
    ec.seed = cfg.seed;
    ec.routing = cfg.routing;
    ec.deterministic = cfg.deterministic;
    ec.local_a_refresh = cfg.local_a_refresh;
    std::tie(model, trace) = run_dsfacto(ec, train, test_ptr);
  } else {
    SerialConfig sc;
    sc.mode = cfg.mode == RunMode::serial_batch ? SerialMode::batch : SerialMode::incremental;
    sc.K = cfg.K;
    sc.epochs = cfg.epochs;
    sc.hyper = cfg.hyper();
    sc.init_sd = cfg.init_sd;
    sc.seed = cfg.seed;
    std::tie(model, trace) = train_serial(sc, train, test_ptr);
  }

  if (!cfg.out_path.empty()) {
    write_trace_file(trace, cfg.out_path);
  }

  const char* metric_name = cfg.task == Task::regression ? "rmse" : "accuracy";
  std::cout << "mode=" << args.mode << " epochs=" << cfg.epochs
            << " objective=" << fmt6(objective(model, train, cfg.hyper())) << " train_"
            << metric_name << "=" << fmt6(evaluate(model, train));
  if (test_ptr) {
    std::cout << " test_" << metric_name << "=" << fmt6(evaluate(model, *test_ptr));
  }
  std::cout << std::endl;
  return 0;
}

int execute_synth(SynthArgs& args) {
  args.spec.task = parse_task(args.task);
  if (args.out_path.empty()) throw ConfigError("--out is required");
  auto [data, planted] = synth_fm(args.spec);
  write_libsvm_file(data, args.out_path);
  std::cout << "wrote " << data.size() << " examples (D=" << data.D << ") to "
            << args.out_path << std::endl;
  return 0;
}

int execute_bench(BenchArgs& args) {
  if (args.epochs < 1) throw ConfigError("--epochs must be >= 1");
  if (args.workers.empty()) throw ConfigError("--workers list must be nonempty");
  if (std::find(args.workers.begin(), args.workers.end(), 1) == args.workers.end()) {
    throw ConfigError("--workers list must include 1 (speedup baseline)");
  }
  for (int p : args.workers) {
    if (p < 1 || p > 64) throw ConfigError("worker counts must be in [1, 64]");
  }
  const Task task = parse_task(args.task);

  Dataset train;
  if (!args.train_path.empty()) {
    train = load_libsvm(args.train_path, task);
  } else if (args.synth_n > 0 && args.synth_d > 0) {
    SynthSpec spec;
    spec.N = args.synth_n;
    spec.D = args.synth_d;
    spec.K = args.K;
    spec.density = args.density;
    spec.noise_sd = args.noise_sd;
    spec.task = task;
    spec.seed = args.seed;
    train = synth_fm(spec).first;
  } else {
    throw ConfigError("bench needs --train FILE or --synth-n/--synth-d");
  }

  EngineConfig ec;
  ec.K = args.K;
  ec.epochs = args.epochs;
  ec.hyper.eta = args.eta;
  ec.hyper.decay = args.decay;
  ec.hyper.lambda_w = args.lambda_w;
  ec.hyper.lambda_v = args.lambda_v;
  ec.hyper.loss = args.loss.empty()
                      ? (task == Task::classification ? LossKind::logistic : LossKind::squared)
                      : parse_loss(args.loss);
  ec.init_sd = args.init_sd;
  ec.seed = args.seed;
  ec.routing = parse_routing(args.routing);
  ec.eval_per_epoch = false;  // timing covers the training loop only

  {
    // untimed warm-up: first-touch faults and allocator growth otherwise
    // land on whichever worker count runs first
    EngineConfig warm = ec;
    warm.workers = 1;
    warm.epochs = 1;
    run_dsfacto(warm, train, nullptr);
  }

  std::vector<std::pair<int, double>> timings;
  double base = 0.0;
  for (int p : args.workers) {
    ec.workers = p;
    auto [model, trace] = run_dsfacto(ec, train, nullptr);
    const double elapsed = trace.empty() ? 0.0 : trace.back().elapsed_secs;
    if (p == 1) base = elapsed;
    timings.emplace_back(p, elapsed);
    std::cerr << "bench: P=" << p << " elapsed=" << fmt6(elapsed) << "s" << std::endl;
  }

  std::ostringstream csv;
  csv << "workers,elapsed_secs,speedup\n";
  for (auto [p, t] : timings) {
    csv << p << ',' << fmt6(t) << ',' << fmt6(base / t) << '\n';
  }
  if (args.out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + args.out_path + "' for writing");
    out << csv.str();
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"dsfacto: hybrid-parallel factorization machine trainer"};
  app.require_subcommand(1);

  TrainArgs train_args;
  SynthArgs synth_args;
  BenchArgs bench_args;

  CLI::App* train_cmd = app.add_subcommand("train", "Train a factorization machine");
  {
    RunConfig& cfg = train_args.config;
    train_cmd->add_option("--train", cfg.train_path, "Training set (LIBSVM format)");
    train_cmd->add_option("--test", cfg.test_path, "Held-out test set (LIBSVM format)");
    train_cmd->add_option("--task", train_args.task, "regression | classification");
    train_cmd->add_option("--loss", train_args.loss,
                          "squared | logistic (defaults to the task's loss)");
    train_cmd->add_option("--mode", train_args.mode,
                          "serial-batch | serial-incremental | dsfacto");
    train_cmd->add_option("--workers", cfg.workers, "Worker count for dsfacto mode");
    train_cmd->add_option("--epochs", cfg.epochs, "Training epochs");
    train_cmd->add_option("--eta", cfg.eta, "Learning rate");
    train_cmd->add_option("--decay", cfg.decay, "Per-epoch multiplicative eta decay");
    train_cmd->add_option("--lambda-w", cfg.lambda_w, "L2 penalty on w");
    train_cmd->add_option("--lambda-v", cfg.lambda_v, "L2 penalty on V");
    train_cmd->add_option("--k", cfg.K, "Latent factors per feature");
    train_cmd->add_option("--seed", cfg.seed, "Run seed");
    train_cmd->add_option("--init-sd", cfg.init_sd, "Stddev of the V initialization");
    train_cmd->add_option("--routing", train_args.routing, "ring | random token routing");
    train_cmd->add_option("--dim", cfg.force_D, "Force the feature dimensionality");
    train_cmd->add_option("--out", cfg.out_path, "Trace CSV output path");
    train_cmd->add_flag("--deterministic", cfg.deterministic,
                        "Multiplex workers on one thread");
    train_cmd->add_flag("--local-a-refresh", cfg.local_a_refresh,
                        "Fold each latent update into the stored a immediately");
  }

  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic LIBSVM dataset");
  {
    SynthSpec& spec = synth_args.spec;
    synth_cmd->add_option("--n", spec.N, "Examples")->required();
    synth_cmd->add_option("--d", spec.D, "Dimensions")->required();
    synth_cmd->add_option("--k", spec.K, "Latent factors of the planted model")->required();
    synth_cmd->add_option("--density", spec.density, "Per-feature inclusion probability");
    synth_cmd->add_option("--noise-sd", spec.noise_sd, "Label noise stddev");
    synth_cmd->add_option("--task", synth_args.task, "regression | classification");
    synth_cmd->add_option("--seed", spec.seed, "Generator seed");
    synth_cmd->add_option("--out", synth_args.out_path, "Output path")->required();
  }

  CLI::App* bench_cmd = app.add_subcommand("bench", "Scaling benchmark over worker counts");
  {
    bench_cmd->add_option("--train", bench_args.train_path, "Dataset (LIBSVM format)");
    bench_cmd->add_option("--synth-n", bench_args.synth_n, "Synthesize N examples instead");
    bench_cmd->add_option("--synth-d", bench_args.synth_d, "Synthetic dimensionality");
    bench_cmd->add_option("--density", bench_args.density, "Synthetic density");
    bench_cmd->add_option("--noise-sd", bench_args.noise_sd, "Synthetic label noise");
    bench_cmd->add_option("--task", bench_args.task, "regression | classification");
    bench_cmd->add_option("--loss", bench_args.loss, "squared | logistic");
    bench_cmd->add_option("--k", bench_args.K, "Latent factors");
    bench_cmd->add_option("--epochs", bench_args.epochs, "Epochs per worker count");
    bench_cmd->add_option("--eta", bench_args.eta, "Learning rate");
    bench_cmd->add_option("--decay", bench_args.decay, "Per-epoch eta decay");
    bench_cmd->add_option("--lambda-w", bench_args.lambda_w, "L2 penalty on w");
    bench_cmd->add_option("--lambda-v", bench_args.lambda_v, "L2 penalty on V");
    bench_cmd->add_option("--init-sd", bench_args.init_sd, "Stddev of V initialization");
    bench_cmd->add_option("--seed", bench_args.seed, "Run seed");
    bench_cmd->add_option("--workers", bench_args.workers, "Worker counts to time")
        ->delimiter(',');
    bench_cmd->add_option("--routing", bench_args.routing, "ring | random");
    bench_cmd->add_option("--out", bench_args.out_path, "CSV output path (default stdout)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (train_cmd->parsed()) return execute_train(train_args);
    if (synth_cmd->parsed()) return execute_synth(synth_args);
    if (bench_cmd->parsed()) return execute_bench(bench_args);
    std::cerr << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace dsfacto::cli
