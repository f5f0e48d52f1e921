#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nucspde {

struct McEstimate {
  std::string label;
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(n)
  std::size_t n = 0;
};

// Two-pass mean/variance in index order, so the result does not depend on scheduling.
McEstimate estimate(std::string label, std::span<const double> values);

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExecutionConfig {
  int threads = 0;  // 0: OpenMP default
};

// Per-path statistics, row-major (path, statistic).
class EnsembleTable {
 public:
  EnsembleTable(std::vector<std::string> labels, std::size_t paths);

  std::size_t paths() const { return paths_; }
  std::size_t width() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::span<double> row(std::size_t path) { return {data_.data() + path * width(), width()}; }
  std::span<const double> row(std::size_t path) const { return {data_.data() + path * width(), width()}; }
  std::vector<double> column(std::size_t stat) const;
  std::size_t index(const std::string& label) const;
  McEstimate estimate(std::size_t stat) const;
  McEstimate estimate(const std::string& label) const { return estimate(index(label)); }
  const std::vector<double>& data() const { return data_; }

 private:
  std::vector<std::string> labels_;
  std::size_t paths_;
  std::vector<double> data_;
};

// Fills one row per path id; must be a pure function of the path id.
using PathStatistic = std::function<void(std::uint64_t path_id, std::span<double> out)>;

EnsembleTable run_ensemble(std::vector<std::string> labels, std::size_t paths, const PathStatistic& stat,
                           const ExecutionConfig& exec = {});
EnsembleTable run_ensemble_serial(std::vector<std::string> labels, std::size_t paths, const PathStatistic& stat);

}  // namespace nucspde
