#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwinv/boundary_trace.hpp"
#include "dwinv/config.hpp"
#include "dwinv/util.hpp"

namespace dwinv {

using ordered_json = nlohmann::ordered_json;

/// Quotes a CSV field per RFC 4180 when it contains a comma, quote, or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  out += "\r\n";
  return out;
}

/// Streams rows to a CSV file. The file is opened in binary mode so the
/// RFC 4180 CRLF terminators are written verbatim on every platform.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw config_error("cannot open output file: " + path);
  }
  void row(const std::vector<std::string>& fields) { out_ << csv_row(fields); }
  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

/// Parses RFC 4180 text (quoted fields, doubled quotes, CRLF or LF rows).
/// Used by the round-trip tests; enough of the grammar to read our own files.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_open = false;
  size_t i = 0;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_open = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_open = true;
        break;
      case ',':
        end_field();
        field_open = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        field_open = true;
        break;
    }
    ++i;
  }
  if (field_open || !field.empty() || !row.empty()) end_row();
  return rows;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open output file: " + path);
  out << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

/// One JSON object per line, '\n' terminated.
class JsonLinesWriter {
 public:
  explicit JsonLinesWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw config_error("cannot open output file: " + path);
  }
  void record(const ordered_json& j) { out_ << j.dump() << '\n'; }

 private:
  std::ofstream out_;
};

/// Writes a boundary trace as t, then one column per gamma1 node labeled by
/// its coordinate along the measured side.
inline void write_trace_csv(const std::string& path, const BoundaryTrace& trace,
                            const std::string& value_name) {
  const DomainMesh& mesh = *trace.mesh;
  CsvWriter csv(path);
  std::vector<std::string> header{"t"};
  for (size_t j = 0; j < mesh.gamma1.size(); ++j) {
    const auto& p = mesh.nodes[mesh.gamma1[j]];
    double coord = mesh.dim == 1 ? p[0] : p[1];
    header.push_back(value_name + "_at_" + format_g17(coord));
  }
  csv.row(header);
  for (int n = 0; n < trace.n_samples(); ++n) {
    std::vector<std::string> row{format_g17(trace.t(n))};
    for (Eigen::Index j = 0; j < trace.values.cols(); ++j)
      row.push_back(format_g17(trace.values(n, j)));
    csv.row(row);
  }
}

struct RunManifest {
  std::string command;
  std::string config_path;
  uint64_t config_hash = 0;
  std::string resolved_config;
  std::vector<std::string> outputs;
  double wall_clock_seconds = 0.0;
};

/// Drops the wall_clock_seconds line, the only nondeterministic part of a
/// manifest, so reruns can be compared byte-for-byte.
inline std::string strip_wall_clock(const std::string& text) {
  std::string out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (line.find("wall_clock_seconds") == std::string::npos) out += line + "\n";
    pos = nl + 1;
  }
  return out;
}

/// The manifest is deterministic except for wall_clock_seconds, which is the
/// last key so byte comparisons can stop before it.
inline void write_manifest(const std::string& path, const RunManifest& m) {
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = m.command;
  j["config_path"] = m.config_path;
  j["config_hash"] = strfmt("%016llx", static_cast<unsigned long long>(m.config_hash));
  j["resolved_config"] = m.resolved_config;
  j["outputs"] = m.outputs;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace dwinv
