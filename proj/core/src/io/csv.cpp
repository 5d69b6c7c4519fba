#include "seldkd/io/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace seldkd::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t b = 0;
    while (b < field.size() && field[b] == ' ') ++b;
    out.push_back(field.substr(b));
  }
  return out;
}

double to_double(const std::string& s, const std::string& path, int lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad numeric field '" + s + "'");
  }
}

int to_int(const std::string& s, const std::string& path, int lineno) {
  const double v = to_double(s, path, lineno);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected integer, got '" + s + "'");
  return i;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open CSV file: " + path);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot create CSV file: " + path);
  return f;
}

}  // namespace

std::vector<LabelRow> read_label_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<LabelRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    if (f.size() != 6)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 6 label fields");
    LabelRow r;
    r.frame = to_int(f[0], path, lineno);
    r.cls = to_int(f[1], path, lineno);
    r.track = to_int(f[2], path, lineno);
    r.azimuth_deg = to_double(f[3], path, lineno);
    r.elevation_deg = to_double(f[4], path, lineno);
    r.distance_cm = to_double(f[5], path, lineno);
    rows.push_back(r);
  }
  return rows;
}

void write_label_csv(const std::string& path, const std::vector<LabelRow>& rows) {
  auto out = open_out(path);
  for (const auto& r : rows)
    out << r.frame << "," << r.cls << "," << r.track << "," << r.azimuth_deg << ","
        << r.elevation_deg << "," << r.distance_cm << "\n";
}

std::vector<KeypointRow> read_keypoint_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<KeypointRow> rows;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (!header_seen) {
      header_seen = true;  // first non-empty line is the header
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 4 keypoint fields");
    KeypointRow r;
    r.frame = to_int(f[0], path, lineno);
    r.speaker = to_int(f[1], path, lineno);
    r.u = to_double(f[2], path, lineno);
    r.v = to_double(f[3], path, lineno);
    rows.push_back(r);
  }
  return rows;
}

void write_keypoint_csv(const std::string& path, const std::vector<KeypointRow>& rows) {
  auto out = open_out(path);
  out << "frame_idx,speaker_idx,u,v\n";
  out.precision(10);
  for (const auto& r : rows) out << r.frame << "," << r.speaker << "," << r.u << "," << r.v << "\n";
}

std::vector<PredRow> read_pred_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw std::runtime_error("empty prediction CSV: " + path);
  ++lineno;
  const auto header = split_fields(line);
  if (header.size() < 4 || header[0] != "frame" || header[1] != "class")
    throw std::runtime_error(path + ": prediction CSV must start with 'frame,class,...' header");
  int dist_col = -1, conf_col = -1;
  for (std::size_t i = 4; i < header.size(); ++i) {
    if (header[i] == "distance_m") dist_col = static_cast<int>(i);
    else if (header[i] == "confidence") conf_col = static_cast<int>(i);
    else throw std::runtime_error(path + ": unknown prediction CSV column '" + header[i] + "'");
  }
  std::vector<PredRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    if (f.size() != header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": column count mismatch");
    PredRow r;
    r.frame = to_int(f[0], path, lineno);
    r.cls = to_int(f[1], path, lineno);
    r.azimuth_deg = to_double(f[2], path, lineno);
    r.elevation_deg = to_double(f[3], path, lineno);
    if (dist_col >= 0) r.distance_m = to_double(f[dist_col], path, lineno);
    if (conf_col >= 0) r.confidence = to_double(f[conf_col], path, lineno);
    rows.push_back(r);
  }
  return rows;
}

void write_pred_csv(const std::string& path, const std::vector<PredRow>& rows, bool with_distance,
                    bool with_confidence) {
  auto out = open_out(path);
  out << "frame,class,azimuth_deg,elevation_deg";
  if (with_distance) out << ",distance_m";
  if (with_confidence) out << ",confidence";
  out << "\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.frame << "," << r.cls << "," << r.azimuth_deg << "," << r.elevation_deg;
    if (with_distance) out << "," << (r.distance_m ? *r.distance_m : 0.0);
    if (with_confidence) out << "," << (r.confidence ? *r.confidence : 1.0);
    out << "\n";
  }
}

}  // namespace seldkd::io
