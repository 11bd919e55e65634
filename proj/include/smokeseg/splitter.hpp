#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "smokeseg/types.hpp"

namespace smokeseg {

struct SplitAssignment {
  std::map<std::string, Split> by_id;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{};  // train, val, test
};

// Greedy per-stream frame thinning: within each group_key, scanning in
// timestamp order, a frame is kept iff its timestamp is at least
// min_gap_s after the last kept frame; the first frame is always kept.
// Returns the kept ids. Every sample must carry a timestamp.
std::vector<std::string> temporal_thin(const std::vector<ImageSample>& samples, double min_gap_s);

// Assigns whole groups to TRAIN/VAL/TEST so no group spans two splits.
// Groups are shuffled by seed; one group seeds each split, the rest go
// greedily to the split with the largest remaining sample-count deficit
// against ratios. Groups containing pinned_test_ids go wholly to TEST first.
SplitAssignment group_split(const std::vector<ImageSample>& samples,
                            std::array<double, 3> ratios, std::uint64_t seed,
                            const std::set<std::string>& pinned_test_ids = {});

// Returns a new manifest with split fields set from the assignment.
DatasetManifest apply_split(const DatasetManifest& manifest, const SplitAssignment& assignment);

struct SplitCountsRow {
  std::array<int, 3> counts{};  // train, val, test
  int total() const { return counts[0] + counts[1] + counts[2]; }
};

struct SplitReport {
  std::vector<std::string> findings;  // empty when the split is valid
  std::map<std::string, SplitCountsRow> per_source;
  SplitCountsRow totals;
  int unassigned = 0;

  bool ok() const { return findings.empty(); }
  std::string table() const;
  nlohmann::json to_json() const;
};

// Checks group-disjointness across splits and per-group UAV temporal gaps
// within each split; tallies per-source counts. Violations become findings,
// not errors.
SplitReport verify_split(const DatasetManifest& manifest, double min_gap_s = 120.0);

// Split file: one "id<TAB>SPLIT" line per sample.
void save_split(const SplitAssignment& assignment, const std::string& path);
SplitAssignment load_split(const std::string& path);

}  // namespace smokeseg
