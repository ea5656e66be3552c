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

// Per-utterance metric rows and their CSV form.
//
// Columns: id,SI-SDR,SDR,Loss,LossSDR,CE,PESQ,CSIG,CBAK,COVL. The last four
// are left empty for values computed by external tools. The final row has
// id "mean" and holds the column means.

#ifndef SASE_OBJECTIVES_METRICS_HPP_
#define SASE_OBJECTIVES_METRICS_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace sase::objectives {

struct UtteranceMetrics {
  std::string id;
  double si_sdr = 0.0;
  double sdr = 0.0;
  double loss = 0.0;      // total training objective
  double loss_sdr = 0.0;  // SDR part alone
  double cross_entropy = 0.0;

  bool operator==(const UtteranceMetrics&) const = default;
};

constexpr const char* kAggregateId = "mean";

/// Column means under id "mean". Throws std::invalid_argument when empty.
UtteranceMetrics aggregate(const std::vector<UtteranceMetrics>& rows);

/// Writes the rows followed by their aggregate. Values use 17 significant
/// digits so they parse back unchanged.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<UtteranceMetrics>& rows);

/// Reads every row, aggregate included. Throws DataError on malformed input.
std::vector<UtteranceMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace sase::objectives

#endif  // SASE_OBJECTIVES_METRICS_HPP_
