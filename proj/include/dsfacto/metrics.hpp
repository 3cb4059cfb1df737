#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "dsfacto/types.hpp"

namespace dsfacto {

double rmse(std::span<const double> predictions, std::span<const double> labels);

// Fraction of exact matches between two {+1, -1} sequences.
double accuracy(std::span<const double> predictions, std::span<const double> labels);

// Task-dependent metric of a model on a dataset: RMSE for regression,
// accuracy of sign predictions for classification.
double evaluate(const FMModel& model, const Dataset& data);

// CSV: header `epoch,objective,elapsed_secs,train_metric,test_metric`,
// one row per epoch, reals with 6 significant digits, LF endings. A missing
// test metric leaves the last field empty.
void write_trace(const TrainTrace& trace, std::ostream& out);
void write_trace_file(const TrainTrace& trace, const std::string& path);

}  // namespace dsfacto
