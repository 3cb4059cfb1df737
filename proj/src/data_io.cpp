#include "dsfacto/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "dsfacto/fm.hpp"

namespace dsfacto {

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

bool parse_full_double(std::string_view tok, double& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_full_int(std::string_view tok, int& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

double parse_label(std::string_view tok, Task task, std::size_t line_no) {
  double y = 0.0;
  if (!parse_full_double(tok, y)) {
    fail(line_no, "malformed label '" + std::string(tok) + "'");
  }
  if (task == Task::classification) {
    if (y == 0.0 || y == -1.0) return -1.0;
    if (y == 1.0) return 1.0;
    fail(line_no, "classification label must be one of {0, 1, +1, -1}, got '" +
                      std::string(tok) + "'");
  }
  return y;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, Task task, int force_D) {
  Dataset ds;
  ds.task = task;
  int max_index = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    std::istringstream fields(line);
    std::string tok;
    if (!(fields >> tok)) {
      continue;  // blank or comment-only line
    }

    SparseExample x;
    x.label = parse_label(tok, task, line_no);
    while (fields >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        fail(line_no, "malformed feature token '" + tok + "'");
      }
      int idx = 0;
      double val = 0.0;
      if (!parse_full_int(std::string_view(tok).substr(0, colon), idx) ||
          !parse_full_double(std::string_view(tok).substr(colon + 1), val)) {
        fail(line_no, "malformed feature token '" + tok + "'");
      }
      if (idx < 1) {
        fail(line_no, "feature index must be >= 1, got " + std::to_string(idx));
      }
      if (force_D > 0 && idx > force_D) {
        fail(line_no, "feature index " + std::to_string(idx) +
                          " exceeds forced dimensionality " + std::to_string(force_D));
      }
      x.features.push_back({idx, val});
    }

    std::sort(x.features.begin(), x.features.end(),
              [](const Feature& a, const Feature& b) { return a.index < b.index; });
    for (std::size_t i = 1; i < x.features.size(); ++i) {
      if (x.features[i].index == x.features[i - 1].index) {
        fail(line_no, "duplicate feature index " + std::to_string(x.features[i].index));
      }
    }
    std::erase_if(x.features, [](const Feature& f) { return f.value == 0.0; });

    if (!x.features.empty()) {
      max_index = std::max(max_index, x.features.back().index);
    }
    ds.examples.push_back(std::move(x));
  }

  if (ds.examples.empty()) {
    throw ParseError("empty input: no examples found");
  }
  ds.D = force_D > 0 ? force_D : max_index;
  return ds;
}

Dataset load_libsvm(const std::string& path, Task task, int force_D) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "' for reading");
  }
  return parse_libsvm(in, task, force_D);
}

void write_libsvm(const Dataset& data, std::ostream& out) {
  char buf[64];
  for (const SparseExample& x : data.examples) {
    std::snprintf(buf, sizeof buf, "%.17g", x.label);
    out << buf;
    for (const Feature& f : x.features) {
      std::snprintf(buf, sizeof buf, "%.17g", f.value);
      out << ' ' << f.index << ':' << buf;
    }
    out << '\n';
  }
}

void write_libsvm_file(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  write_libsvm(data, out);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must be in [0, 1)");
  }
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train =
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * (1.0 - test_fraction)));
  if (n_train == 0) {
    throw std::invalid_argument("split would produce an empty train set");
  }

  Dataset train, test;
  train.D = test.D = data.D;
  train.task = test.task = data.task;
  train.examples.reserve(n_train);
  test.examples.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).examples.push_back(data.examples[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, FMModel> synth_fm(const SynthSpec& spec) {
  if (spec.N < 1 || spec.D < 1 || spec.K < 1) {
    throw std::invalid_argument("synth_fm requires N, D, K >= 1");
  }
  if (!(spec.density > 0.0 && spec.density <= 1.0)) {
    throw std::invalid_argument("density must be in (0, 1]");
  }
  if (spec.noise_sd < 0.0) {
    throw std::invalid_argument("noise_sd must be >= 0");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> latent(0.0, 0.1);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  FMModel planted = FMModel::zeros(spec.D, spec.K);
  planted.w0 = unit(rng);
  for (double& wj : planted.w) wj = unit(rng);
  for (double& vjk : planted.v) vjk = latent(rng);

  Dataset ds;
  ds.D = spec.D;
  ds.task = spec.task;
  ds.examples.reserve(static_cast<std::size_t>(spec.N));
  for (int i = 0; i < spec.N; ++i) {
    SparseExample x;
    for (int j = 1; j <= spec.D; ++j) {
      if (u(rng) < spec.density) {
        double val = unit(rng);
        if (val != 0.0) {
          x.features.push_back({j, val});
        }
      }
    }
    const double f = score(planted, x);
    const double noisy = spec.noise_sd > 0.0
                             ? f + spec.noise_sd * unit(rng)
                             : f;
    x.label = spec.task == Task::regression ? noisy : (noisy < 0.0 ? -1.0 : 1.0);
    ds.examples.push_back(std::move(x));
  }
  return {std::move(ds), std::move(planted)};
}

}  // namespace dsfacto
