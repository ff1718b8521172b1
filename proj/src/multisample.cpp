#include "drm/multisample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "drm/errors.hpp"

namespace drm {

MultiSample::MultiSample(std::vector<Eigen::ArrayXd> samples)
    : samples_(std::move(samples)) {
  // A lone base population (m = 0) is allowed; every DRM estimator then
  // reduces to its nonparametric counterpart.
  if (samples_.empty()) {
    throw DataError("multisample", "need at least one population");
  }
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    if (samples_[k].size() < 2) {
      throw DataError("multisample", "population " + std::to_string(k) +
                                         " has fewer than two observations");
    }
    if (!samples_[k].isFinite().all()) {
      throw DataError("multisample", "population " + std::to_string(k) +
                                         " contains a nonfinite value");
    }
    total_ += samples_[k].size();
  }
}

Eigen::VectorXd MultiSample::counts() const {
  Eigen::VectorXd n(num_populations());
  for (int k = 0; k < num_populations(); ++k) {
    n[k] = static_cast<double>(samples_[k].size());
  }
  return n;
}

Eigen::ArrayXd MultiSample::fractions() const {
  Eigen::ArrayXd rho(num_populations());
  for (int k = 0; k < num_populations(); ++k) {
    rho[k] = static_cast<double>(samples_[k].size()) / static_cast<double>(total_);
  }
  return rho;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // Trim surrounding whitespace and a possible trailing CR.
    auto first = cell.find_first_not_of(" \t\r");
    auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? std::string()
                        : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_value(const std::string& cell, std::size_t row) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw DataError("multisample.load_csv",
                    "non-numeric value '" + cell + "' at row " + std::to_string(row));
  }
  if (used != cell.size()) {
    throw DataError("multisample.load_csv",
                    "non-numeric value '" + cell + "' at row " + std::to_string(row));
  }
  return v;
}

}  // namespace

MultiSample load_csv(const std::string& path, CsvLayout layout) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("multisample.load_csv", "cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("multisample.load_csv", "'" + path + "' is empty");
  }
  const auto header = split_csv_line(line);

  std::vector<std::vector<double>> columns;
  if (layout == CsvLayout::kLong) {
    if (header.size() != 2) {
      throw DataError("multisample.load_csv",
                      "long layout expects header 'group,value'");
    }
    std::vector<std::string> labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != 2) {
        throw DataError("multisample.load_csv",
                        "expected two cells at row " + std::to_string(row));
      }
      const auto it = std::find(labels.begin(), labels.end(), cells[0]);
      std::size_t idx;
      if (it == labels.end()) {
        labels.push_back(cells[0]);
        columns.emplace_back();
        idx = labels.size() - 1;
      } else {
        idx = static_cast<std::size_t>(it - labels.begin());
      }
      columns[idx].push_back(parse_value(cells[1], row));
    }
  } else {
    columns.resize(header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() > header.size()) {
        throw DataError("multisample.load_csv",
                        "row " + std::to_string(row) + " has more cells than the header");
      }
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].empty()) continue;  // empty cells are skipped
        columns[c].push_back(parse_value(cells[c], row));
      }
    }
  }

  std::vector<Eigen::ArrayXd> samples;
  samples.reserve(columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k].size() < 2) {
      throw DataError("multisample.load_csv",
                      "population " + std::to_string(k) +
                          " has fewer than two observations (degenerate sample)");
    }
    samples.emplace_back(
        Eigen::Map<const Eigen::ArrayXd>(columns[k].data(),
                                         static_cast<Eigen::Index>(columns[k].size())));
  }
  return MultiSample(std::move(samples));
}

PooledEmpirical pool(const MultiSample& ms) {
  const auto n_total = ms.total();
  std::vector<std::pair<double, int>> tagged;
  tagged.reserve(static_cast<std::size_t>(n_total));
  for (int k = 0; k < ms.num_populations(); ++k) {
    const auto& s = ms.sample(k);
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      tagged.emplace_back(s[j], k);
    }
  }
  std::stable_sort(tagged.begin(), tagged.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  PooledEmpirical pe;
  pe.points.resize(n_total);
  pe.population.resize(static_cast<std::size_t>(n_total));
  for (Eigen::Index i = 0; i < n_total; ++i) {
    pe.points[i] = tagged[static_cast<std::size_t>(i)].first;
    pe.population[static_cast<std::size_t>(i)] = tagged[static_cast<std::size_t>(i)].second;
  }
  return pe;
}

}  // namespace drm
