#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "biograd/train.hpp"

namespace biograd {

inline constexpr int kRecordSchemaVersion = 1;

std::string record_to_json(const RunRecord& rec);
RunRecord record_from_json(const std::string& line);

void write_jsonl(const std::vector<RunRecord>& runs, const std::string& path);
std::vector<RunRecord> read_jsonl(const std::string& path);

// Tidy per-run CSV: rule, data_fraction, noise_kind, noise_level, sparsity,
// seed, epoch, test_accuracy. Wall-clock never appears, so reruns are
// byte-identical.
void write_tidy_csv(const std::vector<RunRecord>& runs, const std::string& path);

// Aggregated per-epoch mean/std grouped by configuration.
void write_curves_csv(const std::vector<RunRecord>& runs, std::ostream& os);
void write_curves_csv(const std::vector<RunRecord>& runs, const std::string& path);

// Shortest round-trip decimal form; used for every float the tool emits.
std::string format_double(double v);

} // namespace biograd
