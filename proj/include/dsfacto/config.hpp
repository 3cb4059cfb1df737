#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dsfacto/engine.hpp"
#include "dsfacto/types.hpp"

namespace dsfacto {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { serial_batch, serial_incremental, dsfacto };

// Everything a training run needs, collected from the command line.
struct RunConfig {
  std::string train_path;
  std::string test_path;  // empty = no test set
  Task task = Task::regression;
  LossKind loss = LossKind::squared;
  int force_D = 0;  // 0 = infer from data
  int K = 4;
  int epochs = 10;
  double eta = 0.001;
  double decay = 1.0;
  double lambda_w = 0.0;
  double lambda_v = 0.0;
  int workers = 1;
  RoutingPolicy routing = RoutingPolicy::ring;
  std::uint64_t seed = 1;
  double init_sd = 0.01;
  bool local_a_refresh = false;
  bool deterministic = false;
  std::string out_path;  // trace CSV; empty = do not write
  RunMode mode = RunMode::dsfacto;

  Hyperparams hyper() const {
    Hyperparams h;
    h.eta = eta;
    h.lambda_w = lambda_w;
    h.lambda_v = lambda_v;
    h.loss = loss;
    h.decay = decay;
    return h;
  }

  void validate() const;
};

RunMode parse_run_mode(const std::string& name);
Task parse_task(const std::string& name);
LossKind parse_loss(const std::string& name);
RoutingPolicy parse_routing(const std::string& name);

}  // namespace dsfacto
