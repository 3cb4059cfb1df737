#include "dsfacto/partition.hpp"

#include <random>
#include <stdexcept>

namespace dsfacto {

std::vector<RowBlock> partition_rows(std::size_t N, int P) {
  if (P < 1) {
    throw std::invalid_argument("worker count must be >= 1");
  }
  if (static_cast<std::size_t>(P) > N) {
    throw std::invalid_argument("worker count " + std::to_string(P) +
                                " exceeds example count " + std::to_string(N));
  }
  const std::size_t base = N / static_cast<std::size_t>(P);
  const std::size_t extra = N % static_cast<std::size_t>(P);  // first `extra` blocks get one more
  std::vector<RowBlock> blocks;
  blocks.reserve(static_cast<std::size_t>(P));
  std::size_t at = 0;
  for (int p = 0; p < P; ++p) {
    const std::size_t len = base + (static_cast<std::size_t>(p) < extra ? 1 : 0);
    blocks.push_back({p, at, at + len});
    at += len;
  }
  return blocks;
}

std::vector<std::vector<ParamToken>> make_tokens(const FMModel& model, int P,
                                                 std::uint64_t seed) {
  if (P < 1 || P > 64) {
    throw std::invalid_argument("worker count must be in [1, 64]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, P - 1);

  std::vector<std::vector<ParamToken>> queues(static_cast<std::size_t>(P));
  for (int dim = 0; dim <= model.D; ++dim) {
    ParamToken tok;
    tok.dim = dim;
    tok.epoch = 1;
    tok.phase = Phase::update;
    if (dim == 0) {
      tok.w = model.w0;
    } else {
      tok.w = model.wj(dim);
      tok.v.assign(model.v.begin() + static_cast<std::size_t>(dim - 1) * model.K,
                   model.v.begin() + static_cast<std::size_t>(dim) * model.K);
    }
    queues[static_cast<std::size_t>(pick(rng))].push_back(std::move(tok));
  }
  return queues;
}

}  // namespace dsfacto
