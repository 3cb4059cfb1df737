#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "dsfacto/types.hpp"

namespace dsfacto {

// One full-batch gradient-descent epoch: G_i and a_i are computed for every
// example at the current parameters, then w0, w and V receive a single
// simultaneous update from the mean gradients plus regularizers.
void batch_epoch(FMModel& model, const Dataset& train, const Hyperparams& hyper);

// One incremental pass visiting examples in `order` (0-based permutation of
// the training set). refresh_period = 1 computes f and a fresh per visited
// example (the serial default); refresh_period = N recomputes the stored
// G and A for all examples once at the start of the epoch and runs the
// whole pass on those stale values, which reproduces the distributed
// engine's update semantics at P = 1.
void incremental_epoch(FMModel& model, const Dataset& train, const Hyperparams& hyper,
                       std::span<const std::size_t> order, std::size_t refresh_period = 1);

enum class SerialMode { batch, incremental };

struct SerialConfig {
  SerialMode mode = SerialMode::incremental;
  int K = 4;
  int epochs = 0;
  Hyperparams hyper;
  double init_sd = 0.01;
  std::uint64_t seed = 1;
};

// Initializes (w = 0, V ~ N(0, init_sd)), runs `epochs` epochs with the
// learning rate decayed multiplicatively per epoch, and records one trace
// row per epoch. Incremental mode reshuffles the visit order each epoch
// from the run seed. Trace elapsed time covers the update work only.
std::pair<FMModel, TrainTrace> train_serial(const SerialConfig& config, const Dataset& train,
                                            const Dataset* test);

}  // namespace dsfacto
