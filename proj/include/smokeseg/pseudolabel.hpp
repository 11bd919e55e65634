#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "smokeseg/types.hpp"

namespace smokeseg {

enum class TeacherKind { BoxPrompted, BoxTrainedInstance, SyntheticOracle };
const char* to_string(TeacherKind k);

struct TeacherRequest {
  cv::Mat image;  // may be empty when the teacher does not need pixels
  std::string image_path;
  int width = 0;
  int height = 0;
  std::vector<BoxAnnotation> boxes;
};

struct TeacherResult {
  std::vector<SegMask> masks;  // one per instance; BOX_PROMPTED: one per box
  std::vector<double> scores;  // confidence in [0,1], parallel to masks
};

class TeacherAdapter {
 public:
  virtual ~TeacherAdapter() = default;
  virtual TeacherKind kind() const = 0;
  virtual std::string descriptor() const = 0;
  // Whether segment() must receive decoded pixels (false for oracles, which
  // work from the box geometry alone).
  virtual bool needs_pixels() const { return true; }
  // Whether segment() may be called from several workers concurrently.
  virtual bool share_safe() const { return false; }
  virtual TeacherResult segment(const TeacherRequest& request) = 0;
};

enum class OracleShape { FillBox, InscribedEllipse };

// Deterministic test substitute for the heavyweight teachers. Emits one mask
// per box: the filled box rectangle or the inscribed ellipse. Scores are a
// seeded hash of the box coordinates mapped into [0.5, 1], so outputs are
// reproducible and independent of box order.
std::unique_ptr<TeacherAdapter> oracle_box_teacher(OracleShape shape, std::uint64_t noise_seed);

// Wraps an external segmenter process (started once via /bin/sh -c command).
// Line protocol on the child's stdin/stdout, one exchange per image:
//
//   request:   <image_path>\t<x0,y0,x1,y1[;x0,y0,x1,y1...]>
//   response:  <m>                       (number of masks)
//              <mask_path>\t<score>      (m lines; paths readable by read_mask)
//
// A response line "ERR\t<message>" reports a per-image failure.
std::unique_ptr<TeacherAdapter> external_process_teacher(TeacherKind kind,
                                                         const std::string& command);

// Pixelwise union of the teacher's instance masks. BOX_PROMPTED teachers
// always contribute their single best mask per box; for other kinds only
// masks with score >= score_threshold are merged. Empty box list yields the
// all-zero mask without consulting the teacher.
SegMask generate_pseudo_label(const TeacherRequest& request, TeacherAdapter& teacher,
                              double score_threshold = 0.5, bool clip_to_boxes = false);

struct PseudoLabelSet {
  std::map<std::string, std::string> mask_paths;  // sample id -> path relative to root_dir
  std::string teacher_descriptor;
  double score_threshold = 0.5;
  std::string generated_at;  // ISO-8601
  std::string root_dir;      // directory mask_paths are relative to (not serialized)

  std::string mask_full_path(const std::string& id) const;
};

struct PseudoLabelOptions {
  double score_threshold = 0.5;
  bool clip_to_boxes = false;
  int workers = 1;
};

// Writes one mask per TRAIN/VAL sample under out_dir/masks and the index
// file out_dir/index.jsonl. Valid existing masks are kept (resumable).
// Per-sample failures do not stop other samples; if any sample ends without
// a mask the job throws, listing every failed id, with successful masks left
// on disk.
PseudoLabelSet run_pseudolabel_job(const DatasetManifest& manifest, TeacherAdapter& teacher,
                                   const std::string& out_dir,
                                   const PseudoLabelOptions& options = {});

// Index file: a JSON header line {"pseudolabel_index_version", "teacher",
// "score_threshold", "generated_at"}, then one {"id", "mask"} line per entry.
void save_pseudolabel_index(const PseudoLabelSet& set, const std::string& path);
PseudoLabelSet load_pseudolabel_index(const std::string& path);

}  // namespace smokeseg
