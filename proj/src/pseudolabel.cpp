#include "smokeseg/pseudolabel.hpp"

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "smokeseg/common.hpp"
#include "smokeseg/mask_io.hpp"

namespace smokeseg {

const char* to_string(TeacherKind k) {
  switch (k) {
    case TeacherKind::BoxPrompted: return "BOX_PROMPTED";
    case TeacherKind::BoxTrainedInstance: return "BOX_TRAINED_INSTANCE";
    case TeacherKind::SyntheticOracle: return "SYNTHETIC_ORACLE";
  }
  return "SYNTHETIC_ORACLE";
}

namespace {

class OracleBoxTeacher final : public TeacherAdapter {
 public:
  OracleBoxTeacher(OracleShape shape, std::uint64_t seed) : shape_(shape), seed_(seed) {}

  TeacherKind kind() const override { return TeacherKind::SyntheticOracle; }
  bool needs_pixels() const override { return false; }
  bool share_safe() const override { return true; }

  std::string descriptor() const override {
    std::ostringstream os;
    os << "oracle:" << (shape_ == OracleShape::FillBox ? "fill_box" : "inscribed_ellipse")
       << ":seed=" << seed_;
    return os.str();
  }

  TeacherResult segment(const TeacherRequest& request) override {
    TeacherResult result;
    for (const auto& box : request.boxes) {
      SegMask mask = SegMask::zeros(request.width, request.height);
      if (shape_ == OracleShape::FillBox) {
        for (int y = box.y_min; y < box.y_max; ++y) {
          for (int x = box.x_min; x < box.x_max; ++x) mask.at(x, y) = 1;
        }
      } else {
        const double cx = 0.5 * (box.x_min + box.x_max);
        const double cy = 0.5 * (box.y_min + box.y_max);
        const double rx = 0.5 * box.width();
        const double ry = 0.5 * box.height();
        for (int y = box.y_min; y < box.y_max; ++y) {
          for (int x = box.x_min; x < box.x_max; ++x) {
            const double dx = (x + 0.5 - cx) / rx;
            const double dy = (y + 0.5 - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) mask.at(x, y) = 1;
          }
        }
      }
      result.masks.push_back(std::move(mask));
      result.scores.push_back(box_score(box));
    }
    return result;
  }

 private:
  // Order-independent per-box score in [0.5, 1].
  double box_score(const BoxAnnotation& box) const {
    std::uint64_t h = seed_;
    for (int v : {box.x_min, box.y_min, box.x_max, box.y_max}) {
      h = combine_seeds(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
    }
    return 0.5 + 0.5 * (static_cast<double>(h >> 11) / 9007199254740992.0);
  }

  OracleShape shape_;
  std::uint64_t seed_;
};

// Keeps one child process alive and exchanges one request/response per image.
class ExternalProcessTeacher final : public TeacherAdapter {
 public:
  ExternalProcessTeacher(TeacherKind kind, std::string command)
      : kind_(kind), command_(std::move(command)) {
    if (command_.empty()) throw Error("external teacher: empty command");
  }

  ~ExternalProcessTeacher() override {
    if (to_child_) std::fclose(to_child_);
    if (from_child_) std::fclose(from_child_);
    if (pid_ > 0) waitpid(pid_, nullptr, 0);
  }

  TeacherKind kind() const override { return kind_; }
  std::string descriptor() const override {
    return std::string("external:") + to_string(kind_) + ":" + command_;
  }

  TeacherResult segment(const TeacherRequest& request) override {
    std::lock_guard<std::mutex> lock(io_mutex_);
    start_if_needed();

    std::ostringstream line;
    line << request.image_path << "\t";
    for (std::size_t i = 0; i < request.boxes.size(); ++i) {
      const auto& b = request.boxes[i];
      if (i) line << ";";
      line << b.x_min << "," << b.y_min << "," << b.x_max << "," << b.y_max;
    }
    line << "\n";
    const std::string out = line.str();
    if (std::fwrite(out.data(), 1, out.size(), to_child_) != out.size() ||
        std::fflush(to_child_) != 0) {
      throw Error("external teacher: cannot write request (child gone?)");
    }

    const std::string first = read_line();
    if (first.rfind("ERR\t", 0) == 0) {
      throw Error("external teacher error: " + first.substr(4));
    }
    int count = 0;
    try {
      count = std::stoi(first);
    } catch (...) {
      throw Error("external teacher: bad response line '" + first + "'");
    }
    if (count < 0) throw Error("external teacher: negative mask count");

    TeacherResult result;
    for (int i = 0; i < count; ++i) {
      const std::string entry = read_line();
      const auto tab = entry.find('\t');
      if (tab == std::string::npos) {
        throw Error("external teacher: expected '<mask_path>\\t<score>', got '" + entry + "'");
      }
      result.masks.push_back(
          read_mask(entry.substr(0, tab), std::make_pair(request.width, request.height)));
      result.scores.push_back(std::stod(entry.substr(tab + 1)));
    }
    return result;
  }

 private:
  void start_if_needed() {
    if (pid_ > 0) return;
    // A dead child must surface as an Error from fwrite/fgetc, not a SIGPIPE
    // kill of the whole process.
    static std::once_flag sigpipe_once;
    std::call_once(sigpipe_once, [] { signal(SIGPIPE, SIG_IGN); });
    int to_pipe[2];
    int from_pipe[2];
    if (pipe(to_pipe) != 0 || pipe(from_pipe) != 0) {
      throw Error("external teacher: pipe() failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw Error("external teacher: fork() failed");
    if (pid_ == 0) {
      dup2(to_pipe[0], STDIN_FILENO);
      dup2(from_pipe[1], STDOUT_FILENO);
      close(to_pipe[0]);
      close(to_pipe[1]);
      close(from_pipe[0]);
      close(from_pipe[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_pipe[0]);
    close(from_pipe[1]);
    to_child_ = fdopen(to_pipe[1], "w");
    from_child_ = fdopen(from_pipe[0], "r");
    if (!to_child_ || !from_child_) throw Error("external teacher: fdopen failed");
  }

  std::string read_line() {
    std::string line;
    int c;
    while ((c = std::fgetc(from_child_)) != EOF && c != '\n') line.push_back(static_cast<char>(c));
    if (c == EOF && line.empty()) {
      throw Error("external teacher: child closed its output (command: " + command_ + ")");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  TeacherKind kind_;
  std::string command_;
  std::mutex io_mutex_;
  pid_t pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
};

std::string sanitize_id(const std::string& id) {
  std::string out;
  bool changed = false;
  for (char c : id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-') {
      out.push_back(c);
    } else {
      out.push_back('_');
      changed = true;
    }
  }
  if (changed) {
    out += "_" + hex64(fnv1a64({reinterpret_cast<const std::uint8_t*>(id.data()), id.size()}))
                     .substr(0, 8);
  }
  return out;
}

}  // namespace

std::unique_ptr<TeacherAdapter> oracle_box_teacher(OracleShape shape, std::uint64_t noise_seed) {
  return std::make_unique<OracleBoxTeacher>(shape, noise_seed);
}

std::unique_ptr<TeacherAdapter> external_process_teacher(TeacherKind kind,
                                                         const std::string& command) {
  return std::make_unique<ExternalProcessTeacher>(kind, command);
}

SegMask generate_pseudo_label(const TeacherRequest& request, TeacherAdapter& teacher,
                              double score_threshold, bool clip_to_boxes) {
  if (request.width <= 0 || request.height <= 0) {
    throw Error("generate_pseudo_label: invalid image dims");
  }
  for (const auto& b : request.boxes) {
    if (b.x_min < 0 || b.y_min < 0 || b.x_max > request.width || b.y_max > request.height ||
        b.x_min >= b.x_max || b.y_min >= b.y_max) {
      throw Error("generate_pseudo_label: box out of bounds or degenerate");
    }
  }
  SegMask label = SegMask::zeros(request.width, request.height);
  if (request.boxes.empty()) return label;

  const TeacherResult result = teacher.segment(request);
  if (result.masks.size() != result.scores.size()) {
    throw Error("teacher returned " + std::to_string(result.masks.size()) + " masks but " +
                std::to_string(result.scores.size()) + " scores");
  }
  const bool per_box = teacher.kind() != TeacherKind::BoxTrainedInstance;
  if (per_box && result.masks.size() != request.boxes.size()) {
    std::ostringstream os;
    os << "teacher (" << to_string(teacher.kind()) << ") returned " << result.masks.size()
       << " masks for " << request.boxes.size() << " boxes";
    throw Error(os.str());
  }

  for (std::size_t i = 0; i < result.masks.size(); ++i) {
    const SegMask& mask = result.masks[i];
    if (mask.width != request.width || mask.height != request.height) {
      std::ostringstream os;
      os << "teacher mask " << i << " is " << mask.width << "x" << mask.height << ", image is "
         << request.width << "x" << request.height;
      throw Error(os.str());
    }
    const double score = result.scores[i];
    if (score < 0.0 || score > 1.0) throw Error("teacher score outside [0,1]");
    // Box-prompted teachers always contribute their single best mask per box.
    if (teacher.kind() != TeacherKind::BoxPrompted && score < score_threshold) continue;

    if (clip_to_boxes && per_box) {
      const auto& b = request.boxes[i];
      for (int y = b.y_min; y < b.y_max; ++y) {
        for (int x = b.x_min; x < b.x_max; ++x) {
          if (mask.at(x, y)) label.at(x, y) = 1;
        }
      }
    } else if (clip_to_boxes) {
      for (const auto& b : request.boxes) {
        for (int y = b.y_min; y < b.y_max; ++y) {
          for (int x = b.x_min; x < b.x_max; ++x) {
            if (mask.at(x, y)) label.at(x, y) = 1;
          }
        }
      }
    } else {
      for (std::size_t p = 0; p < mask.data.size(); ++p) {
        if (mask.data[p]) label.data[p] = 1;
      }
    }
  }
  return label;
}

std::string PseudoLabelSet::mask_full_path(const std::string& id) const {
  const auto it = mask_paths.find(id);
  if (it == mask_paths.end()) throw Error("no pseudo-label for sample '" + id + "'");
  if (root_dir.empty()) return it->second;
  return (std::filesystem::path(root_dir) / it->second).string();
}

PseudoLabelSet run_pseudolabel_job(const DatasetManifest& manifest, TeacherAdapter& teacher,
                                   const std::string& out_dir, const PseudoLabelOptions& options) {
  ensure_dir((std::filesystem::path(out_dir) / "masks").string());

  std::vector<const ImageSample*> todo;
  for (const auto& s : manifest.samples) {
    if (s.split == Split::Train || s.split == Split::Val) todo.push_back(&s);
  }

  PseudoLabelSet set;
  set.teacher_descriptor = teacher.descriptor();
  set.score_threshold = options.score_threshold;
  set.generated_at = iso8601_now();
  set.root_dir = out_dir;

  std::vector<std::string> rel_paths(todo.size());
  std::vector<std::string> errors(todo.size());

  std::mutex teacher_mutex;
  const bool lock_teacher = !teacher.share_safe();
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const ImageSample& sample = *todo[i];
      const std::string rel =
          (std::filesystem::path("masks") / (sanitize_id(sample.id) + ".png")).string();
      const std::string full = (std::filesystem::path(out_dir) / rel).string();
      try {
        if (!mask_file_valid(full, std::make_pair(sample.width, sample.height))) {
          TeacherRequest request;
          request.image_path = sample.image_path;
          request.width = sample.width;
          request.height = sample.height;
          request.boxes = sample.boxes;
          if (teacher.needs_pixels() && !sample.boxes.empty()) {
            request.image = read_image_bgr(sample.image_path);
          }
          SegMask label;
          if (lock_teacher) {
            std::lock_guard<std::mutex> lock(teacher_mutex);
            label = generate_pseudo_label(request, teacher, options.score_threshold,
                                          options.clip_to_boxes);
          } else {
            label = generate_pseudo_label(request, teacher, options.score_threshold,
                                          options.clip_to_boxes);
          }
          write_mask(label, full);
        }
        rel_paths[i] = rel;
      } catch (const std::exception& e) {
        errors[i] = std::string("sample '") + sample.id + "': " + e.what();
      }
    }
  };

  const int n_workers = std::max(1, options.workers);
  if (n_workers == 1 || todo.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<std::string> failures;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (!errors[i].empty()) {
      failures.push_back(errors[i]);
    } else {
      set.mask_paths[todo[i]->id] = rel_paths[i];
    }
  }
  if (!failures.empty()) {
    std::ostringstream os;
    os << "pseudo-label job failed for " << failures.size() << " of " << todo.size()
       << " samples:";
    for (const auto& f : failures) os << "\n  " << f;
    throw Error(os.str());
  }

  save_pseudolabel_index(set, (std::filesystem::path(out_dir) / "index.jsonl").string());
  return set;
}

void save_pseudolabel_index(const PseudoLabelSet& set, const std::string& path) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write pseudo-label index: " + path);
  nlohmann::json header = {{"pseudolabel_index_version", "1"},
                           {"teacher", set.teacher_descriptor},
                           {"score_threshold", set.score_threshold},
                           {"generated_at", set.generated_at}};
  out << header.dump() << "\n";
  for (const auto& [id, rel] : set.mask_paths) {
    out << nlohmann::json{{"id", id}, {"mask", rel}}.dump() << "\n";
  }
  if (!out) throw Error("pseudo-label index write failed: " + path);
}

PseudoLabelSet load_pseudolabel_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("pseudo-label index not found: " + path);
  PseudoLabelSet set;
  set.root_dir = std::filesystem::path(path).parent_path().string();
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::ostringstream os;
      os << path << ":" << line_no << ": " << e.what();
      throw Error(os.str());
    }
    if (!header_seen) {
      if (!record.contains("pseudolabel_index_version")) {
        throw Error(path + ": missing index header");
      }
      set.teacher_descriptor = record.value("teacher", "");
      set.score_threshold = record.value("score_threshold", 0.5);
      set.generated_at = record.value("generated_at", "");
      header_seen = true;
      continue;
    }
    set.mask_paths[record.at("id").get<std::string>()] = record.at("mask").get<std::string>();
  }
  if (!header_seen) throw Error(path + ": empty pseudo-label index");
  return set;
}

}  // namespace smokeseg
