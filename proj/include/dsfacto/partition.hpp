#pragma once

#include <cstdint>
#include <vector>

#include "dsfacto/types.hpp"

namespace dsfacto {

// Contiguous slice [begin, end) of the training set owned by one worker.
struct RowBlock {
  int worker_id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

enum class Phase { update, accumulate };

// Circulating ownership unit for one feature dimension. dim 0 is the bias
// token carrying w0 (its v is empty); dims 1..D carry (w_j, v_j). Exactly
// one token per dimension exists system-wide; only the worker currently
// holding a token may mutate it. visited_mask records which workers have
// processed the token in the current phase (P <= 64).
struct ParamToken {
  int dim = 0;
  double w = 0.0;
  std::vector<double> v;
  int epoch = 1;
  Phase phase = Phase::update;
  std::uint64_t visited_mask = 0;
};

// Balanced contiguous blocks: block p receives ceil(N/P) or floor(N/P) rows.
std::vector<RowBlock> partition_rows(std::size_t N, int P);

// D+1 tokens (bias + one per dimension) at epoch 1, phase update, each
// assigned to one of the P worker queues uniformly at random from `seed`.
// Within a queue, tokens keep ascending dimension order.
std::vector<std::vector<ParamToken>> make_tokens(const FMModel& model, int P,
                                                 std::uint64_t seed);

}  // namespace dsfacto
