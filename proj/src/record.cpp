#include "cct/record.hpp"

#include <fstream>

#include <json.hpp>

namespace cct {

namespace {

using Json = nlohmann::ordered_json;

Expected<CommitRecord> failure(const std::string& msg) { return Expected<CommitRecord>::failure(msg); }

bool fetch_string(const Json& j, const char* key, std::string& out, std::string& err) {
  auto it = j.find(key);
  if (it == j.end()) {
    err = std::string("missing required key \"") + key + "\"";
    return false;
  }
  if (!it->is_string()) {
    err = std::string("key \"") + key + "\" must be a string";
    return false;
  }
  out = it->get<std::string>();
  return true;
}

}  // namespace

Expected<CommitRecord> parse_commit_record(const std::string& line) {
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded()) return failure("invalid JSON");
  if (!j.is_object()) return failure("record must be a JSON object");

  CommitRecord r;
  std::string err;
  if (!fetch_string(j, "id", r.id, err)) return failure(err);
  if (r.id.empty()) return failure("id must be non-empty");
  if (!fetch_string(j, "project", r.project, err)) return failure(err);
  if (!fetch_string(j, "language", r.language, err)) return failure(err);
  if (!fetch_string(j, "message", r.message, err)) return failure(err);
  if (!fetch_string(j, "diff", r.diff_text, err)) return failure(err);

  auto opt_string = [&](const char* key, std::optional<std::string>& out) -> bool {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return true;
    if (!it->is_string()) {
      err = std::string("key \"") + key + "\" must be a string";
      return false;
    }
    out = it->get<std::string>();
    return true;
  };
  if (!opt_string("old_file", r.old_file)) return failure(err);
  if (!opt_string("new_file", r.new_file)) return failure(err);

  if (auto it = j.find("timestamp"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) return failure("key \"timestamp\" must be an integer");
    r.timestamp = it->get<std::int64_t>();
  }

  if (auto it = j.find("labels"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) return failure("key \"labels\" must be an object");
    const Json& labels = *it;
    auto opt_bool = [&](const char* key, std::optional<bool>& out) -> bool {
      auto lit = labels.find(key);
      if (lit == labels.end() || lit->is_null()) return true;
      if (!lit->is_boolean()) {
        err = std::string("labels.") + key + " must be a boolean";
        return false;
      }
      out = lit->get<bool>();
      return true;
    };
    auto opt_label_string = [&](const char* key, std::optional<std::string>& out) -> bool {
      auto lit = labels.find(key);
      if (lit == labels.end() || lit->is_null()) return true;
      if (!lit->is_string()) {
        err = std::string("labels.") + key + " must be a string";
        return false;
      }
      out = lit->get<std::string>();
      return true;
    };
    if (!opt_bool("defective", r.label_defective)) return failure(err);
    if (!opt_bool("quality", r.label_quality)) return failure(err);
    if (!opt_label_string("old_comment", r.label_old_comment)) return failure(err);
    if (!opt_label_string("new_comment", r.label_new_comment)) return failure(err);
    if (!opt_label_string("review", r.label_review)) return failure(err);
  }
  return r;
}

std::string serialize_commit_record(const CommitRecord& r) {
  Json j;
  j["id"] = r.id;
  j["project"] = r.project;
  j["language"] = r.language;
  j["message"] = r.message;
  j["diff"] = r.diff_text;
  if (r.old_file) j["old_file"] = *r.old_file;
  if (r.new_file) j["new_file"] = *r.new_file;
  if (r.timestamp) j["timestamp"] = *r.timestamp;
  Json labels = Json::object();
  if (r.label_defective) labels["defective"] = *r.label_defective;
  if (r.label_quality) labels["quality"] = *r.label_quality;
  if (r.label_old_comment) labels["old_comment"] = *r.label_old_comment;
  if (r.label_new_comment) labels["new_comment"] = *r.label_new_comment;
  if (r.label_review) labels["review"] = *r.label_review;
  if (!labels.empty()) j["labels"] = labels;
  return j.dump();
}

std::vector<CommitRecord> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file: " + path);
  std::vector<CommitRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Expected<CommitRecord> r = parse_commit_record(line);
    if (!r.ok()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + r.error());
    }
    records.push_back(std::move(r).value());
  }
  return records;
}

CorpusLoad read_corpus_lenient(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file: " + path);
  CorpusLoad load;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Expected<CommitRecord> r = parse_commit_record(line);
    if (r.ok()) {
      load.records.push_back(std::move(r).value());
    } else {
      // best-effort id for the reject report
      std::string id;
      Json j = Json::parse(line, nullptr, false);
      if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
      load.errors.push_back(CorpusLineError{line_no, std::move(id), r.error()});
    }
  }
  return load;
}

void write_corpus(const std::string& path, const std::vector<CommitRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const CommitRecord& r : records) out << serialize_commit_record(r) << '\n';
}

}  // namespace cct
