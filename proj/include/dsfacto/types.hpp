#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsfacto {

enum class Task { regression, classification };
enum class LossKind { squared, logistic };

// One stored nonzero of an observation. Indices are 1-based like the
// LIBSVM on-disk format; index 0 is reserved for the bias.
struct Feature {
  int index = 0;
  double value = 0.0;
};

// One observation. Invariants: feature indices strictly increasing,
// all in [1, D]; no stored zero values. Labels are real for regression
// and in {+1, -1} for classification.
struct SparseExample {
  std::vector<Feature> features;
  double label = 0.0;

  std::size_t nnz() const { return features.size(); }
};

struct Dataset {
  std::vector<SparseExample> examples;
  int D = 0;
  Task task = Task::regression;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

// Second-order factorization machine: f(x) = w0 + <w, x> + pairwise
// interactions parameterized by rows of V (one K-vector per feature).
struct FMModel {
  double w0 = 0.0;
  std::vector<double> w;  // length D
  std::vector<double> v;  // D x K, row-major; row j-1 is the latent vector of feature j
  int D = 0;
  int K = 0;

  static FMModel zeros(int D, int K) {
    FMModel m;
    m.D = D;
    m.K = K;
    m.w.assign(static_cast<std::size_t>(D), 0.0);
    m.v.assign(static_cast<std::size_t>(D) * static_cast<std::size_t>(K), 0.0);
    return m;
  }

  // j is 1-based.
  double& wj(int j) { return w[static_cast<std::size_t>(j - 1)]; }
  double wj(int j) const { return w[static_cast<std::size_t>(j - 1)]; }
  double& vjk(int j, int k) {
    return v[static_cast<std::size_t>(j - 1) * K + static_cast<std::size_t>(k)];
  }
  double vjk(int j, int k) const {
    return v[static_cast<std::size_t>(j - 1) * K + static_cast<std::size_t>(k)];
  }
};

struct Hyperparams {
  double eta = 0.01;       // learning rate, > 0
  double lambda_w = 0.0;   // L2 penalty on w, >= 0
  double lambda_v = 0.0;   // L2 penalty on V, >= 0
  LossKind loss = LossKind::squared;
  double decay = 1.0;      // per-epoch multiplicative eta decay, in (0, 1]
};

struct TraceRow {
  int epoch = 0;
  double objective = 0.0;
  double elapsed_secs = 0.0;
  double train_metric = 0.0;
  std::optional<double> test_metric;
};

// Per-epoch training log; epochs run 1..T.
using TrainTrace = std::vector<TraceRow>;

}  // namespace dsfacto
