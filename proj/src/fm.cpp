#include "dsfacto/fm.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dsfacto {

namespace {

void check_indices(const FMModel& model, const SparseExample& x) {
  for (const Feature& f : x.features) {
    if (f.index < 1 || f.index > model.D) {
      throw std::out_of_range("feature index " + std::to_string(f.index) +
                              " outside [1, " + std::to_string(model.D) + "]");
    }
  }
}

void check_classification_label(double y) {
  if (y != 1.0 && y != -1.0) {
    throw std::invalid_argument("classification label must be +1 or -1, got " +
                                std::to_string(y));
  }
}

}  // namespace

double score_naive(const FMModel& model, const SparseExample& x) {
  check_indices(model, x);
  double s = model.w0;
  for (const Feature& f : x.features) {
    s += model.wj(f.index) * f.value;
  }
  const auto& feats = x.features;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = i + 1; j < feats.size(); ++j) {
      double dot = 0.0;
      for (int k = 0; k < model.K; ++k) {
        dot += model.vjk(feats[i].index, k) * model.vjk(feats[j].index, k);
      }
      s += dot * feats[i].value * feats[j].value;
    }
  }
  return s;
}

double score(const FMModel& model, const SparseExample& x) {
  check_indices(model, x);
  double linear = model.w0;
  for (const Feature& f : x.features) {
    linear += model.wj(f.index) * f.value;
  }
  double pair = 0.0;
  for (int k = 0; k < model.K; ++k) {
    double a = 0.0;
    double sq = 0.0;
    for (const Feature& f : x.features) {
      const double vx = model.vjk(f.index, k) * f.value;
      a += vx;
      sq += vx * vx;
    }
    pair += a * a - sq;
  }
  return linear + 0.5 * pair;
}

std::vector<double> compute_a(const FMModel& model, const SparseExample& x) {
  check_indices(model, x);
  std::vector<double> a(static_cast<std::size_t>(model.K), 0.0);
  for (const Feature& f : x.features) {
    for (int k = 0; k < model.K; ++k) {
      a[static_cast<std::size_t>(k)] += model.vjk(f.index, k) * f.value;
    }
  }
  return a;
}

double loss_multiplier(LossKind kind, double f, double y) {
  if (kind == LossKind::squared) {
    return f - y;
  }
  check_classification_label(y);
  const double z = y * f;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return -y * e / (1.0 + e);
  }
  return -y / (1.0 + std::exp(z));
}

double loss_value(LossKind kind, double f, double y) {
  if (kind == LossKind::squared) {
    const double r = f - y;
    return 0.5 * r * r;
  }
  check_classification_label(y);
  const double z = y * f;  // loss = log(1 + exp(-z))
  if (z >= 0.0) {
    return std::log1p(std::exp(-z));
  }
  return -z + std::log1p(std::exp(z));
}

double objective(const FMModel& model, const Dataset& data, const Hyperparams& hyper) {
  if (data.empty()) {
    throw std::invalid_argument("objective requires a nonempty dataset");
  }
  double loss_sum = 0.0;
  for (const SparseExample& x : data.examples) {
    loss_sum += loss_value(hyper.loss, score(model, x), x.label);
  }
  double wnorm = 0.0;
  for (double wj : model.w) wnorm += wj * wj;
  double vnorm = 0.0;
  for (double vjk : model.v) vnorm += vjk * vjk;
  return loss_sum / static_cast<double>(data.size()) + 0.5 * hyper.lambda_w * wnorm +
         0.5 * hyper.lambda_v * vnorm;
}

double predict_value(const FMModel& model, const SparseExample& x) {
  return score(model, x);
}

double predict(const FMModel& model, const SparseExample& x, Task task) {
  const double f = score(model, x);
  if (task == Task::regression) {
    return f;
  }
  return f < 0.0 ? -1.0 : 1.0;
}

FMModel init_model(int D, int K, std::uint64_t seed, double init_sd) {
  if (D < 1 || K < 1) {
    throw std::invalid_argument("init_model requires D >= 1 and K >= 1");
  }
  if (init_sd < 0.0) {
    throw std::invalid_argument("init_sd must be >= 0");
  }
  FMModel m = FMModel::zeros(D, K);
  if (init_sd > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, init_sd);
    for (double& vjk : m.v) {
      vjk = normal(rng);
    }
  }
  return m;
}

}  // namespace dsfacto
