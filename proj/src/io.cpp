#include "fuse4d/io.hpp"

#include "fuse4d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace fuse4d::io {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Netpbm-style header token scanner ('#' comments allowed, tracked offset).
struct TokenScanner {
  const std::string& bytes;
  const std::string path;
  std::size_t pos = 0;

  std::string next() {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size()) throw LoadError(path, pos, "unexpected end of header");
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  }

  int next_int(const char* what) {
    const std::size_t at = pos;
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw LoadError(path, at, std::string("malformed ") + what + ": '" + tok + "'");
    }
  }

  double next_double(const char* what) {
    const std::size_t at = pos;
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw LoadError(path, at, std::string("malformed ") + what + ": '" + tok + "'");
    }
  }
};

std::string format_double(double v, const char* fmt = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

// --- PGM ---------------------------------------------------------------------

void write_pgm16(const IntensityFrame& frame, const fs::path& path) {
  std::string bytes;
  bytes += "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) +
           "\n65535\n";
  bytes.reserve(bytes.size() + static_cast<std::size_t>(frame.width()) * frame.height() * 2);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const long v = std::lround(frame.at(x, y) * 65535.0);
      const auto u = static_cast<std::uint16_t>(std::clamp(v, 0L, 65535L));
      bytes += static_cast<char>(u >> 8);
      bytes += static_cast<char>(u & 0xFF);
    }
  }
  write_file(path, bytes);
}

IntensityFrame read_pgm16(const fs::path& path) {
  const std::string bytes = read_file(path);
  TokenScanner scan{bytes, path.string()};
  const std::string magic = scan.next();
  if (magic != "P5") throw LoadError(path.string(), 0, "expected magic 'P5', got '" + magic + "'");
  const int w = scan.next_int("width");
  const int h = scan.next_int("height");
  const int maxval = scan.next_int("maxval");
  if (w <= 0 || h <= 0) throw LoadError(path.string(), scan.pos, "non-positive dimensions");
  if (maxval != 65535) {
    throw LoadError(path.string(), scan.pos, "maxval must be 65535, got " + std::to_string(maxval));
  }
  // Exactly one whitespace byte separates the header from the payload.
  if (scan.pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[scan.pos]))) {
    throw LoadError(path.string(), scan.pos, "missing header terminator");
  }
  std::size_t at = scan.pos + 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * 2;
  if (bytes.size() - at < need) {
    throw LoadError(path.string(), bytes.size(), "truncated payload: need " +
                                                     std::to_string(need) + " bytes, have " +
                                                     std::to_string(bytes.size() - at));
  }
  if (bytes.size() - at > need) {
    throw LoadError(path.string(), at + need, "trailing bytes after payload");
  }
  Grid<double> values(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x, at += 2) {
      const auto hi = static_cast<std::uint8_t>(bytes[at]);
      const auto lo = static_cast<std::uint8_t>(bytes[at + 1]);
      values(x, y) = static_cast<double>((hi << 8) | lo) / 65535.0;
    }
  }
  return IntensityFrame(std::move(values));
}

// --- PFM ---------------------------------------------------------------------

void write_pfm(const DepthFrame& frame, const fs::path& path) {
  std::string bytes;
  bytes += "Pf\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) +
           "\n-1.0\n";
  bytes.reserve(bytes.size() + static_cast<std::size_t>(frame.width()) * frame.height() * 4);
  for (int y = frame.height() - 1; y >= 0; --y) {  // PFM rows run bottom-to-top
    for (int x = 0; x < frame.width(); ++x) {
      const float f = frame.valid(x, y) ? static_cast<float>(frame.at(x, y)) : 0.0f;
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      bytes += static_cast<char>(u & 0xFF);
      bytes += static_cast<char>((u >> 8) & 0xFF);
      bytes += static_cast<char>((u >> 16) & 0xFF);
      bytes += static_cast<char>((u >> 24) & 0xFF);
    }
  }
  write_file(path, bytes);
}

DepthFrame read_pfm(const fs::path& path) {
  const std::string bytes = read_file(path);
  TokenScanner scan{bytes, path.string()};
  const std::string magic = scan.next();
  if (magic != "Pf") {
    throw LoadError(path.string(), 0,
                    magic == "PF" ? "color PFM not supported, expected grayscale 'Pf'"
                                  : "expected magic 'Pf', got '" + magic + "'");
  }
  const int w = scan.next_int("width");
  const int h = scan.next_int("height");
  const double scale = scan.next_double("scale");
  if (w <= 0 || h <= 0) throw LoadError(path.string(), scan.pos, "non-positive dimensions");
  if (scale == 0.0) throw LoadError(path.string(), scan.pos, "scale must be non-zero");
  const bool little_endian = scale < 0.0;
  if (scan.pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[scan.pos]))) {
    throw LoadError(path.string(), scan.pos, "missing header terminator");
  }
  std::size_t at = scan.pos + 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * 4;
  if (bytes.size() - at < need) {
    throw LoadError(path.string(), bytes.size(), "truncated payload: need " +
                                                     std::to_string(need) + " bytes, have " +
                                                     std::to_string(bytes.size() - at));
  }
  if (bytes.size() - at > need) {
    throw LoadError(path.string(), at + need, "trailing bytes after payload");
  }

  Grid<double> values(w, h, 0.0);
  Mask valid(w, h, 0);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x, at += 4) {
      const auto b0 = static_cast<std::uint8_t>(bytes[at]);
      const auto b1 = static_cast<std::uint8_t>(bytes[at + 1]);
      const auto b2 = static_cast<std::uint8_t>(bytes[at + 2]);
      const auto b3 = static_cast<std::uint8_t>(bytes[at + 3]);
      const std::uint32_t u = little_endian
                                  ? (static_cast<std::uint32_t>(b3) << 24 | b2 << 16 | b1 << 8 | b0)
                                  : (static_cast<std::uint32_t>(b0) << 24 | b1 << 16 | b2 << 8 | b3);
      float f;
      std::memcpy(&f, &u, 4);
      if (f == 0.0f) continue;  // invalid pixel
      if (!std::isfinite(f) || f < 0.0f) {
        throw LoadError(path.string(), at, "depth sample must be finite and >= 0");
      }
      values(x, y) = static_cast<double>(f);
      valid(x, y) = 1;
    }
  }
  return {std::move(values), std::move(valid)};
}

// --- sequences ---------------------------------------------------------------

namespace {

std::string frame_tag(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

}  // namespace

void write_sequence(const Sequence& seq, const fs::path& dir) {
  if (seq.frames.empty()) throw InvalidInput("write_sequence: empty sequence");
  fs::create_directories(dir);

  std::string manifest;
  manifest += "fuse4d_sequence = 1\n";
  manifest += "frames = " + std::to_string(seq.frames.size()) + "\n";
  manifest += "width = " + std::to_string(seq.width()) + "\n";
  manifest += "height = " + std::to_string(seq.height()) + "\n";
  manifest += "fx = " + format_double(seq.intrinsics.fx, "%.17g") + "\n";
  manifest += "fy = " + format_double(seq.intrinsics.fy, "%.17g") + "\n";
  manifest += "u0 = " + format_double(seq.intrinsics.u0, "%.17g") + "\n";
  manifest += "v0 = " + format_double(seq.intrinsics.v0, "%.17g") + "\n";
  if (seq.ground_truth) {
    const GroundTruth& gt = *seq.ground_truth;
    manifest += "gt_shape = " + gt.shape + "\n";
    if (gt.shape == "sphere") {
      manifest += "gt_radius_mm = " + format_double(gt.radius_mm, "%.17g") + "\n";
      manifest += "gt_fall_px = " + format_double(gt.fall_px, "%.17g") + "\n";
      for (std::size_t i = 0; i < gt.centers.size(); ++i) {
        manifest += "gt_center_" + frame_tag(static_cast<int>(i)) + " = " +
                    format_double(gt.centers[i].x(), "%.17g") + " " +
                    format_double(gt.centers[i].y(), "%.17g") + " " +
                    format_double(gt.centers[i].z(), "%.17g") + "\n";
      }
    }
  }
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const std::string tag = frame_tag(static_cast<int>(i));
    manifest += "frame_" + tag + " = intensity_" + tag + ".pgm depth_" + tag + ".pfm\n";
    write_pgm16(seq.frames[i].intensity(), dir / ("intensity_" + tag + ".pgm"));
    write_pfm(seq.frames[i].depth(), dir / ("depth_" + tag + ".pfm"));
  }
  write_file(dir / "manifest.txt", manifest);
}

Sequence read_sequence(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.txt";
  const std::string text = read_file(manifest_path);

  auto known_key = [](const std::string& key) {
    static const char* fixed[] = {"fuse4d_sequence", "frames", "width", "height", "fx", "fy",
                                  "u0", "v0", "gt_shape", "gt_radius_mm", "gt_fall_px"};
    for (const char* k : fixed) {
      if (key == k) return true;
    }
    auto numbered = [&key](const std::string& prefix) {
      if (key.size() != prefix.size() + 4 || key.compare(0, prefix.size(), prefix) != 0) {
        return false;
      }
      for (std::size_t i = prefix.size(); i < key.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(key[i]))) return false;
      }
      return true;
    };
    return numbered("gt_center_") || numbered("frame_");
  };

  std::map<std::string, std::string> kv;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string line = text.substr(line_start, line_end - line_start);
    if (!line.empty()) {
      const std::size_t sep = line.find(" = ");
      if (sep == std::string::npos) {
        throw LoadError(manifest_path.string(), line_start, "expected 'key = value' line");
      }
      const std::string key = line.substr(0, sep);
      if (!known_key(key)) {
        throw LoadError(manifest_path.string(), line_start, "unknown key " + key);
      }
      if (kv.count(key)) throw LoadError(manifest_path.string(), line_start, "duplicate key " + key);
      kv[key] = line.substr(sep + 3);
    }
    line_start = line_end + 1;
  }

  auto require = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw LoadError(manifest_path.string(), 0, "missing key " + key);
    return it->second;
  };
  auto to_int = [&](const std::string& key) {
    try {
      return std::stoi(require(key));
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception&) {
      throw LoadError(manifest_path.string(), 0, "malformed integer for " + key);
    }
  };
  auto to_double = [&](const std::string& key) {
    try {
      return std::stod(require(key));
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception&) {
      throw LoadError(manifest_path.string(), 0, "malformed number for " + key);
    }
  };

  if (require("fuse4d_sequence") != "1") {
    throw LoadError(manifest_path.string(), 0, "unsupported manifest version");
  }
  const int n = to_int("frames");
  const int w = to_int("width");
  const int h = to_int("height");
  if (n <= 0 || w <= 0 || h <= 0) {
    throw LoadError(manifest_path.string(), 0, "non-positive frames/width/height");
  }

  Sequence seq;
  seq.intrinsics = {to_double("fx"), to_double("fy"), to_double("u0"), to_double("v0")};

  if (kv.count("gt_shape")) {
    GroundTruth gt;
    gt.shape = kv["gt_shape"];
    if (gt.shape == "sphere") {
      gt.radius_mm = to_double("gt_radius_mm");
      gt.fall_px = to_double("gt_fall_px");
      for (int i = 0; i < n; ++i) {
        std::istringstream ss(require("gt_center_" + frame_tag(i)));
        Vec3 c;
        if (!(ss >> c.x() >> c.y() >> c.z())) {
          throw LoadError(manifest_path.string(), 0, "malformed gt_center_" + frame_tag(i));
        }
        gt.centers.push_back(c);
      }
    }
    seq.ground_truth = std::move(gt);
  }

  for (int i = 0; i < n; ++i) {
    const std::string key = "frame_" + frame_tag(i);
    std::istringstream ss(require(key));
    std::string intensity_name, depth_name, extra;
    if (!(ss >> intensity_name >> depth_name) || (ss >> extra)) {
      throw LoadError(manifest_path.string(), 0, "malformed frame entry " + key);
    }
    const fs::path ipath = dir / intensity_name;
    const fs::path dpath = dir / depth_name;
    if (!fs::exists(ipath)) throw LoadError(ipath.string(), 0, "missing file");
    if (!fs::exists(dpath)) throw LoadError(dpath.string(), 0, "missing file");

    IntensityFrame intensity = read_pgm16(ipath);
    DepthFrame depth = read_pfm(dpath);
    if (intensity.width() != w || intensity.height() != h) {
      throw LoadError(ipath.string(), 0, "dimensions do not match the manifest");
    }
    if (depth.width() != w || depth.height() != h) {
      throw LoadError(dpath.string(), 0, "dimensions do not match the manifest");
    }
    seq.frames.emplace_back(i, std::move(intensity), std::move(depth), seq.intrinsics);
  }
  if (seq.ground_truth && seq.ground_truth->shape == "sphere" &&
      seq.ground_truth->centers.size() != seq.frames.size()) {
    throw LoadError(manifest_path.string(), 0, "ground-truth centers do not cover all frames");
  }
  return seq;
}

// --- CSV reports --------------------------------------------------------------

namespace {

constexpr const char* kReportHeader =
    "kind,method,frame,n_fused,noise_depth_mm,noise_intensity,sweep,mean_roughness_mm,"
    "roughness_std_mm,shape_correctness,delta_s_mm,delta_t_mm,r_squared,status,params";

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  if (std::isnan(*v)) return "nan";
  return format_double(*v);
}

std::vector<std::string> split_csv_line(const std::string& line, const std::string& path,
                                        std::size_t offset) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw LoadError(path, offset, "unterminated quoted CSV field");
  cells.push_back(cur);
  return cells;
}

std::optional<double> parse_cell(const std::string& s, const std::string& path,
                                 std::size_t offset) {
  if (s.empty()) return std::nullopt;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw LoadError(path, offset, "malformed numeric cell '" + s + "'");
  }
}

}  // namespace

void write_report(const metrics::MetricsReport& report, const fs::path& path) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const metrics::ReportRow& row : report.rows) {
    const std::string method = row.method.empty() ? report.method : row.method;
    const std::optional<double> metric_fields[] = {row.mean_roughness_mm, row.roughness_std_mm,
                                                   row.shape_correctness, row.delta_s_mm,
                                                   row.delta_t_mm,        row.r_squared};
    bool has_nan = false;
    for (const auto& f : metric_fields) has_nan |= f && std::isnan(*f);

    out += csv_quote(row.kind) + "," + csv_quote(method) + "," + cell(row.frame) + "," +
           cell(row.n_fused) + "," + cell(row.noise_depth_mm) + "," + cell(row.noise_intensity) +
           "," + cell(row.sweep) + "," + cell(row.mean_roughness_mm) + "," +
           cell(row.roughness_std_mm) + "," + cell(row.shape_correctness) + "," +
           cell(row.delta_s_mm) + "," + cell(row.delta_t_mm) + "," + cell(row.r_squared) + "," +
           (has_nan ? "nan" : "ok") + "," + csv_quote(report.params_echo) + "\n";
  }
  write_file(path, out);
}

metrics::MetricsReport read_report(const fs::path& path) {
  const std::string text = read_file(path);
  metrics::MetricsReport report;

  std::size_t line_start = 0;
  bool first = true;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string line = text.substr(line_start, line_end - line_start);
    if (first) {
      if (line != kReportHeader) {
        throw LoadError(path.string(), line_start, "unexpected report header");
      }
      first = false;
    } else if (!line.empty()) {
      const auto cells = split_csv_line(line, path.string(), line_start);
      if (cells.size() != 15) {
        throw LoadError(path.string(), line_start,
                        "expected 15 columns, got " + std::to_string(cells.size()));
      }
      metrics::ReportRow row;
      row.kind = cells[0];
      row.method = cells[1];
      row.frame = parse_cell(cells[2], path.string(), line_start);
      row.n_fused = parse_cell(cells[3], path.string(), line_start);
      row.noise_depth_mm = parse_cell(cells[4], path.string(), line_start);
      row.noise_intensity = parse_cell(cells[5], path.string(), line_start);
      row.sweep = parse_cell(cells[6], path.string(), line_start);
      row.mean_roughness_mm = parse_cell(cells[7], path.string(), line_start);
      row.roughness_std_mm = parse_cell(cells[8], path.string(), line_start);
      row.shape_correctness = parse_cell(cells[9], path.string(), line_start);
      row.delta_s_mm = parse_cell(cells[10], path.string(), line_start);
      row.delta_t_mm = parse_cell(cells[11], path.string(), line_start);
      row.r_squared = parse_cell(cells[12], path.string(), line_start);
      if (report.rows.empty()) {
        report.method = row.method;
        report.params_echo = cells[14];
      }
      report.rows.push_back(std::move(row));
    }
    line_start = line_end + 1;
  }
  if (first) throw LoadError(path.string(), 0, "empty report file");
  return report;
}

}  // namespace fuse4d::io
