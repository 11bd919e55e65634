#pragma once

#include <string>

#include "smokeseg/types.hpp"

namespace smokeseg {

// Manifest file format: UTF-8, one JSON record per line.
//
// An optional first line {"manifest_version": "...", "counts": {"train": N,
// "val": N, "test": N}} declares the version and expected per-split totals.
// Every other line is one sample:
//
//   {"id": "...", "image_path": "...", "width": W, "height": H,
//    "boxes": [[x_min, y_min, x_max, y_max], ...], "source": "UAV",
//    "group_key": "...", "timestamp": 1687000000.0, "split": "TRAIN"}
//
// "timestamp" and "split" are optional (split defaults to UNASSIGNED).
// Unknown keys are rejected, as are duplicate ids and any sample whose boxes
// violate the half-open bounds invariants.

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Tallies actual split counts (train, val, test).
std::array<int, 3> split_counts(const DatasetManifest& manifest);

}  // namespace smokeseg
