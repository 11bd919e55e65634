#include "smokeseg/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "smokeseg/common.hpp"

namespace smokeseg {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& record, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = record.begin(); it != record.end(); ++it) {
    if (!known.count(it.key())) {
      throw Error(where + ": unknown key '" + it.key() + "'");
    }
  }
}

ImageSample parse_sample(const json& record, const std::string& where) {
  static const std::set<std::string> known = {"id",     "image_path", "width",
                                              "height", "boxes",      "source",
                                              "group_key", "timestamp", "split"};
  reject_unknown_keys(record, known, where);
  for (const char* key : {"id", "image_path", "width", "height", "boxes", "source", "group_key"}) {
    if (!record.contains(key)) throw Error(where + ": missing key '" + std::string(key) + "'");
  }
  ImageSample s;
  s.id = record.at("id").get<std::string>();
  s.image_path = record.at("image_path").get<std::string>();
  s.width = record.at("width").get<int>();
  s.height = record.at("height").get<int>();
  for (const auto& box : record.at("boxes")) {
    if (!box.is_array() || box.size() != 4) {
      throw Error(where + ": box must be [x_min, y_min, x_max, y_max]");
    }
    s.boxes.push_back(BoxAnnotation{box[0].get<int>(), box[1].get<int>(), box[2].get<int>(),
                                    box[3].get<int>()});
  }
  s.source = source_from_string(record.at("source").get<std::string>());
  s.group_key = record.at("group_key").get<std::string>();
  if (record.contains("timestamp") && !record.at("timestamp").is_null()) {
    s.timestamp = record.at("timestamp").get<double>();
  }
  if (record.contains("split") && !record.at("split").is_null()) {
    s.split = split_from_string(record.at("split").get<std::string>());
  }
  return s;
}

json sample_to_json(const ImageSample& s) {
  json boxes = json::array();
  for (const auto& b : s.boxes) boxes.push_back(json::array({b.x_min, b.y_min, b.x_max, b.y_max}));
  json record = {
      {"id", s.id},         {"image_path", s.image_path}, {"width", s.width},
      {"height", s.height}, {"boxes", boxes},             {"source", to_string(s.source)},
      {"group_key", s.group_key}};
  if (s.timestamp) record["timestamp"] = *s.timestamp;
  record["split"] = to_string(s.split);
  return record;
}

}  // namespace

std::array<int, 3> split_counts(const DatasetManifest& manifest) {
  std::array<int, 3> counts{0, 0, 0};
  for (const auto& s : manifest.samples) {
    switch (s.split) {
      case Split::Train: ++counts[0]; break;
      case Split::Val: ++counts[1]; break;
      case Split::Test: ++counts[2]; break;
      case Split::Unassigned: break;
    }
  }
  return counts;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("manifest not found: " + path);

  DatasetManifest manifest;
  std::set<std::string> seen_ids;
  std::vector<std::string> problems;
  std::string line;
  int line_no = 0;
  bool saw_record = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::ostringstream where;
    where << path << ":" << line_no;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(where.str() + ": malformed record: " + e.what());
    }
    if (!record.is_object()) throw Error(where.str() + ": record is not an object");

    if (record.contains("manifest_version")) {
      if (saw_record) throw Error(where.str() + ": header must be the first line");
      static const std::set<std::string> known = {"manifest_version", "counts"};
      reject_unknown_keys(record, known, where.str());
      manifest.version = record.at("manifest_version").get<std::string>();
      if (record.contains("counts")) {
        const auto& c = record.at("counts");
        manifest.declared_counts = {c.at("train").get<int>(), c.at("val").get<int>(),
                                    c.at("test").get<int>()};
      }
      continue;
    }

    saw_record = true;
    try {
      ImageSample sample = parse_sample(record, where.str());
      validate_sample(sample, sample.width, sample.height);
      if (!seen_ids.insert(sample.id).second) {
        throw Error(where.str() + ": duplicate id '" + sample.id + "'");
      }
      manifest.samples.push_back(std::move(sample));
    } catch (const Error& e) {
      problems.push_back(e.what());
      if (problems.size() >= 20) break;
    }
  }

  if (!problems.empty()) {
    std::ostringstream os;
    os << "manifest rejected, " << problems.size() << " invalid record(s):";
    for (const auto& p : problems) os << "\n  " << p;
    throw Error(os.str());
  }

  if (manifest.declared_counts) {
    const auto actual = split_counts(manifest);
    const auto& declared = *manifest.declared_counts;
    if (actual != declared) {
      std::ostringstream os;
      os << path << ": declared counts train/val/test " << declared[0] << "/" << declared[1] << "/"
         << declared[2] << " do not match actual " << actual[0] << "/" << actual[1] << "/"
         << actual[2];
      throw Error(os.str());
    }
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest: " + path);
  json header = {{"manifest_version", manifest.version}};
  if (manifest.declared_counts) {
    const auto& c = *manifest.declared_counts;
    header["counts"] = {{"train", c[0]}, {"val", c[1]}, {"test", c[2]}};
  }
  out << header.dump() << "\n";
  for (const auto& s : manifest.samples) out << sample_to_json(s).dump() << "\n";
  if (!out) throw Error("write failed: " + path);
}

}  // namespace smokeseg
