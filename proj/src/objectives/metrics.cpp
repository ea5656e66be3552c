// Copyright 2026 The sase Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sase/objectives/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sase/autodiff/tensor.hpp"

namespace sase::objectives {
namespace {

constexpr const char* kHeader = "id,SI-SDR,SDR,Loss,LossSDR,CE,PESQ,CSIG,CBAK,COVL";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

UtteranceMetrics aggregate(const std::vector<UtteranceMetrics>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no metric rows");
  UtteranceMetrics m;
  m.id = kAggregateId;
  for (const auto& r : rows) {
    m.si_sdr += r.si_sdr;
    m.sdr += r.sdr;
    m.loss += r.loss;
    m.loss_sdr += r.loss_sdr;
    m.cross_entropy += r.cross_entropy;
  }
  const double n = static_cast<double>(rows.size());
  m.si_sdr /= n;
  m.sdr /= n;
  m.loss /= n;
  m.loss_sdr /= n;
  m.cross_entropy /= n;
  return m;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<UtteranceMetrics>& rows) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write metrics CSV " + path.string());
  out << kHeader << '\n';
  auto line = [&](const UtteranceMetrics& r) {
    out << r.id << ',' << num(r.si_sdr) << ',' << num(r.sdr) << ',' << num(r.loss) << ',' << num(r.loss_sdr) << ','
        << num(r.cross_entropy) << ",,,,\n";
  };
  for (const auto& r : rows) line(r);
  line(aggregate(rows));
  if (!out) throw DataError("cannot write metrics CSV " + path.string());
}

std::vector<UtteranceMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw DataError(path.string() + ": unexpected metrics header");
  std::vector<UtteranceMetrics> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 6) throw DataError(path.string() + ":" + std::to_string(lineno) + ": too few columns");
    try {
      rows.push_back({cells[0], std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4]),
                      std::stod(cells[5])});
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace sase::objectives
