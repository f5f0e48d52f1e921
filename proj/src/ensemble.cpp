#include "nucspde/ensemble.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

namespace nucspde {

McEstimate estimate(std::string label, std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("estimate needs at least two samples");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {std::move(label), mean, std::sqrt(ss / (n - 1.0) / n), values.size()};
}

EnsembleTable::EnsembleTable(std::vector<std::string> labels, std::size_t paths)
    : labels_(std::move(labels)), paths_(paths), data_(labels_.size() * paths, 0.0) {}

std::vector<double> EnsembleTable::column(std::size_t stat) const {
  std::vector<double> c(paths_);
  for (std::size_t p = 0; p < paths_; ++p) c[p] = data_[p * width() + stat];
  return c;
}

std::size_t EnsembleTable::index(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw std::out_of_range("no statistic named '" + label + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

McEstimate EnsembleTable::estimate(std::size_t stat) const {
  const std::vector<double> c = column(stat);
  return nucspde::estimate(labels_.at(stat), c);
}

namespace {

void validate(const EnsembleTable& table) {
  for (std::size_t p = 0; p < table.paths(); ++p) {
    auto r = table.row(p);
    for (std::size_t s = 0; s < r.size(); ++s)
      if (!std::isfinite(r[s]))
        throw NonFiniteError("path " + std::to_string(p) + " produced a non-finite value for '" + table.labels()[s] + "'");
  }
}

}  // namespace

EnsembleTable run_ensemble(std::vector<std::string> labels, std::size_t paths, const PathStatistic& stat,
                           const ExecutionConfig& exec) {
  if (paths < 2) throw std::invalid_argument("an ensemble needs at least two paths");
  EnsembleTable table(std::move(labels), paths);
  std::vector<std::exception_ptr> errors(paths);
  const int threads = exec.threads > 0 ? exec.threads : omp_get_max_threads();
  const auto n = static_cast<std::int64_t>(paths);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::int64_t p = 0; p < n; ++p) {
    try {
      stat(static_cast<std::uint64_t>(p), table.row(static_cast<std::size_t>(p)));
    } catch (...) {
      errors[static_cast<std::size_t>(p)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  validate(table);
  return table;
}

EnsembleTable run_ensemble_serial(std::vector<std::string> labels, std::size_t paths, const PathStatistic& stat) {
  if (paths < 2) throw std::invalid_argument("an ensemble needs at least two paths");
  EnsembleTable table(std::move(labels), paths);
  for (std::size_t p = 0; p < paths; ++p) stat(p, table.row(p));
  validate(table);
  return table;
}

}  // namespace nucspde
