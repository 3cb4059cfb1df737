#include "dsfacto/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "dsfacto/fm.hpp"

namespace dsfacto {

namespace {

void check_lengths(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.empty()) {
    throw std::invalid_argument("metric requires nonempty inputs");
  }
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("predictions and labels differ in length");
  }
}

std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> labels) {
  check_lengths(predictions, labels);
  double sq = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - labels[i];
    sq += r * r;
  }
  return std::sqrt(sq / static_cast<double>(predictions.size()));
}

double accuracy(std::span<const double> predictions, std::span<const double> labels) {
  check_lengths(predictions, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if ((predictions[i] != 1.0 && predictions[i] != -1.0) ||
        (labels[i] != 1.0 && labels[i] != -1.0)) {
      throw std::invalid_argument("accuracy requires +1/-1 entries");
    }
    if (predictions[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double evaluate(const FMModel& model, const Dataset& data) {
  std::vector<double> preds, labels;
  preds.reserve(data.size());
  labels.reserve(data.size());
  for (const SparseExample& x : data.examples) {
    preds.push_back(predict(model, x, data.task));
    labels.push_back(x.label);
  }
  return data.task == Task::regression ? rmse(preds, labels) : accuracy(preds, labels);
}

void write_trace(const TrainTrace& trace, std::ostream& out) {
  out << "epoch,objective,elapsed_secs,train_metric,test_metric\n";
  for (const TraceRow& row : trace) {
    out << row.epoch << ',' << fmt6(row.objective) << ',' << fmt6(row.elapsed_secs) << ','
        << fmt6(row.train_metric) << ',';
    if (row.test_metric) {
      out << fmt6(*row.test_metric);
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("trace write failed");
  }
}

void write_trace_file(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  write_trace(trace, out);
}

}  // namespace dsfacto
