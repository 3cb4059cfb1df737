#include "dsfacto/config.hpp"

namespace dsfacto {

void RunConfig::validate() const {
  if (train_path.empty()) throw ConfigError("--train is required");
  if (K < 1) throw ConfigError("--k must be >= 1");
  if (epochs < 0) throw ConfigError("--epochs must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("--eta must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("--decay must be in (0, 1]");
  if (lambda_w < 0.0 || lambda_v < 0.0) throw ConfigError("regularization must be >= 0");
  if (workers < 1 || workers > 64) throw ConfigError("--workers must be in [1, 64]");
  if (init_sd < 0.0) throw ConfigError("--init-sd must be >= 0");
  if (force_D < 0) throw ConfigError("--dim must be >= 0");
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "serial-batch") return RunMode::serial_batch;
  if (name == "serial-incremental") return RunMode::serial_incremental;
  if (name == "dsfacto") return RunMode::dsfacto;
  throw ConfigError("unknown mode '" + name +
                    "' (expected serial-batch, serial-incremental or dsfacto)");
}

Task parse_task(const std::string& name) {
  if (name == "regression") return Task::regression;
  if (name == "classification") return Task::classification;
  throw ConfigError("unknown task '" + name + "' (expected regression or classification)");
}

LossKind parse_loss(const std::string& name) {
  if (name == "squared") return LossKind::squared;
  if (name == "logistic") return LossKind::logistic;
  throw ConfigError("unknown loss '" + name + "' (expected squared or logistic)");
}

RoutingPolicy parse_routing(const std::string& name) {
  if (name == "ring") return RoutingPolicy::ring;
  if (name == "random") return RoutingPolicy::random;
  throw ConfigError("unknown routing '" + name + "' (expected ring or random)");
}

}  // namespace dsfacto
