#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>

#include "dsfacto/types.hpp"

namespace dsfacto {

// Input that cannot be parsed; the message carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// LIBSVM text: `label idx:val [idx:val ...]`, 1-based indices, `#` starts a
// comment. Classification labels {0,1} are remapped to {-1,+1}; unsorted
// indices within a line are sorted; explicit zero values are dropped.
// force_D > 0 fixes the dimensionality (must cover every index seen);
// otherwise D is the maximum index in the file.
Dataset parse_libsvm(std::istream& in, Task task, int force_D = 0);
Dataset load_libsvm(const std::string& path, Task task, int force_D = 0);

void write_libsvm(const Dataset& data, std::ostream& out);
void write_libsvm_file(const Dataset& data, const std::string& path);

// Seeded permutation split; the first ceil(N * (1 - test_fraction)) examples
// of the permutation form the train set.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction,
                                  std::uint64_t seed);

struct SynthSpec {
  int N = 0;
  int D = 0;
  int K = 0;
  double density = 0.5;   // per-feature inclusion probability, in (0, 1]
  double noise_sd = 0.0;
  Task task = Task::regression;
  std::uint64_t seed = 1;
};

// Draws a planted model (w0, w ~ N(0,1), V ~ N(0, 0.1)) and N sparse
// examples labeled f(x) + eps (regression) or sign(f(x) + eps).
// Returns both the data and the planted model.
std::pair<Dataset, FMModel> synth_fm(const SynthSpec& spec);

}  // namespace dsfacto
