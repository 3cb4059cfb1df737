#pragma once

#include <cstdint>
#include <vector>

#include "dsfacto/types.hpp"

namespace dsfacto {

// Pairwise score by explicit double loop over nonzero pairs, O(K*nnz^2).
// Kept as an independent oracle for score(); not used by the trainers.
double score_naive(const FMModel& model, const SparseExample& x);

// f(x) = w0 + sum_j w_j x_j + 1/2 sum_k [(sum_j v_jk x_j)^2 - sum_j v_jk^2 x_j^2],
// summing only over nonzeros. O(K*nnz).
double score(const FMModel& model, const SparseExample& x);

// a_k = sum_j v_jk x_j over the nonzeros of x.
std::vector<double> compute_a(const FMModel& model, const SparseExample& x);

// dl/df. Squared loss: f - y. Logistic: -y / (1 + exp(y*f)), evaluated on
// the branch of sign(y*f) that cannot overflow.
double loss_multiplier(LossKind kind, double f, double y);

// Squared: 1/2 (f-y)^2. Logistic: log(1 + exp(-y*f)) in stable form.
double loss_value(LossKind kind, double f, double y);

// (1/N) sum_i l(f(x_i), y_i) + lambda_w/2 ||w||^2 + lambda_v/2 ||V||^2.
// w0 is not regularized.
double objective(const FMModel& model, const Dataset& data, const Hyperparams& hyper);

// Per-example gradients including the regularizer; an update applies
// -eta times these.
inline double grad_wj(double g, double x_ij, double w_j, double lambda_w) {
  return g * x_ij + lambda_w * w_j;
}

inline double grad_vjk(double g, double x_ij, double a_ik, double v_jk, double lambda_v) {
  return g * (x_ij * a_ik - v_jk * x_ij * x_ij) + lambda_v * v_jk;
}

double predict_value(const FMModel& model, const SparseExample& x);

// Regression: f(x). Classification: sign(f(x)), with f = 0 mapped to +1.
double predict(const FMModel& model, const SparseExample& x, Task task);

// w0 = 0, w = 0, V ~ N(0, init_sd) drawn row-major from the given seed.
FMModel init_model(int D, int K, std::uint64_t seed, double init_sd);

}  // namespace dsfacto
