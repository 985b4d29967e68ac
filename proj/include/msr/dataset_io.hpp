#pragma once

// On-disk RGB-D + gravity samples: 16-bit PNG depth (millimeters), 16-bit PNG
// normals, 8-bit RGB(A), a JSON sidecar with gravity and intrinsics, and a
// JSON-lines manifest. Also ground-truth normals from depth by plane fitting.

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "msr/png_io.hpp"
#include "msr/raster.hpp"

namespace msr {

namespace fs = std::filesystem;

/// Gravity vectors whose norm is within this of 1 are renormalized on load.
inline constexpr double kGravityNormTolerance = 1e-3;

struct SampleRecord {
  std::string frame_id;
  fs::path rgb_path;
  fs::path depth_path;
  std::optional<fs::path> normal_path;
  UnitVector3 gravity{0.0, 1.0, 0.0};
  CameraIntrinsics intrinsics;
};

class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::string dataset_name) : dataset_name_(std::move(dataset_name)) {}

  const std::string& dataset_name() const { return dataset_name_; }
  void set_dataset_name(std::string name) { dataset_name_ = std::move(name); }

  const std::vector<SampleRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// Throws DuplicateFrame if the frame id is already present.
  void append(SampleRecord rec) {
    if (!ids_.insert(rec.frame_id).second) throw DuplicateFrame("Manifest: duplicate frame_id '" + rec.frame_id + "'");
    records_.push_back(std::move(rec));
  }

  const SampleRecord* find(const std::string& frame_id) const {
    for (const auto& r : records_) {
      if (r.frame_id == frame_id) return &r;
    }
    return nullptr;
  }

 private:
  std::string dataset_name_;
  std::vector<SampleRecord> records_;
  std::unordered_set<std::string> ids_;
};

namespace detail {

inline UnitVector3 gravity_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("gravity must be a 3-element array");
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw FormatError("gravity components must be numbers");
    g[i] = j[i].get<double>();
  }
  const double n = g.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) >= kGravityNormTolerance) {
    throw FormatError("gravity is not a unit vector (norm " + std::to_string(n) + ")");
  }
  return UnitVector3(g);
}

inline CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  try {
    return CameraIntrinsics(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                            j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("intrinsics: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("intrinsics: ") + e.what());
  }
}

inline void intrinsics_to_json(const CameraIntrinsics& k, nlohmann::json& j) {
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  j["width"] = k.width;
  j["height"] = k.height;
}

inline nlohmann::json gravity_to_json(const UnitVector3& g) { return nlohmann::json::array({g.x(), g.y(), g.z()}); }

inline fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

inline std::uint16_t encode_normal_component(double c) {
  const double v = std::round((std::clamp(c, -1.0, 1.0) + 1.0) * 0.5 * 65535.0);
  return static_cast<std::uint16_t>(v);
}

inline double decode_normal_component(std::uint16_t s) { return static_cast<double>(s) / 65535.0 * 2.0 - 1.0; }

inline nlohmann::json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw FileMissing("missing file " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

/// Pixel-center aligned bilinear resize with edge clamping.
inline RgbImage resize_rgb(const RgbImage& src, int width, int height) {
  RgbImage out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double v = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(v);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double ay = v - y0;
    for (int x = 0; x < width; ++x) {
      const double u = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(u);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double ax = u - x0;
      if (!src.valid(x0, y0) || !src.valid(x1, y0) || !src.valid(x0, y1) || !src.valid(x1, y1)) {
        out.invalidate(x, y);
        continue;
      }
      std::array<double, 3> c{};
      for (int i = 0; i < 3; ++i) {
        const double top = (1.0 - ax) * src.at(x0, y0)[i] + ax * src.at(x1, y0)[i];
        const double bottom = (1.0 - ax) * src.at(x0, y1)[i] + ax * src.at(x1, y1)[i];
        c[i] = (1.0 - ay) * top + ay * bottom;
      }
      out.set(x, y, to_rgb8(c));
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raster codecs

inline DepthMap decode_depth_png(const PngImage& img, double max_depth = kDefaultMaxDepth) {
  if (img.channels != 1 || img.bit_depth != 16) throw FormatError("depth PNG must be 16-bit grayscale");
  DepthMap d(img.width, img.height, max_depth);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t mm = img.at(x, y, 0);
      if (mm == 0) continue;
      d.set(x, y, mm / 1000.0);  // out-of-range values stay invalid
    }
  }
  return d;
}

inline PngImage encode_depth_png(const DepthMap& d) {
  PngImage img{d.width(), d.height(), 1, 16, {}};
  img.samples.resize(static_cast<std::size_t>(d.width()) * d.height(), 0);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y)) continue;
      // valid depths never encode to the zero sentinel
      const double mm = std::clamp(std::round(d.at(x, y) * 1000.0), 1.0, 65535.0);
      img.samples[static_cast<std::size_t>(y) * d.width() + x] = static_cast<std::uint16_t>(mm);
    }
  }
  return img;
}

inline NormalMap decode_normal_png(const PngImage& img) {
  if (img.channels != 3 || img.bit_depth != 16) throw FormatError("normal PNG must be 16-bit RGB");
  NormalMap n(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec3 v(detail::decode_normal_component(img.at(x, y, 0)), detail::decode_normal_component(img.at(x, y, 1)),
                   detail::decode_normal_component(img.at(x, y, 2)));
      // (32767,32767,32767) and friends decode to ~0; anything that short is not a normal
      if (v.norm() < 0.5) continue;
      n.set(x, y, v);
    }
  }
  return n;
}

inline PngImage encode_normal_png(const NormalMap& n) {
  PngImage img{n.width(), n.height(), 3, 16, {}};
  img.samples.resize(static_cast<std::size_t>(n.width()) * n.height() * 3, 32767);
  for (int y = 0; y < n.height(); ++y) {
    for (int x = 0; x < n.width(); ++x) {
      if (!n.valid(x, y)) continue;
      const std::size_t base = (static_cast<std::size_t>(y) * n.width() + x) * 3;
      for (int c = 0; c < 3; ++c) img.samples[base + c] = detail::encode_normal_component(n.at(x, y)[c]);
    }
  }
  return img;
}

/// Gray and gray+alpha are expanded to RGB; 16-bit is reduced to 8-bit;
/// zero alpha marks an invalid pixel.
inline RgbImage decode_rgb_png(const PngImage& img) {
  const bool gray = img.channels <= 2;
  const bool alpha = img.channels == 2 || img.channels == 4;
  const double scale = img.bit_depth == 16 ? 255.0 / 65535.0 : 1.0;
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (alpha && img.at(x, y, img.channels - 1) == 0) {
        out.invalidate(x, y);
        continue;
      }
      std::array<double, 3> c{};
      for (int i = 0; i < 3; ++i) c[i] = scale * img.at(x, y, gray ? 0 : i);
      out.set(x, y, to_rgb8(c));
    }
  }
  return out;
}

/// RGBA when any pixel is invalid, plain RGB otherwise.
inline PngImage encode_rgb_png(const RgbImage& rgb) {
  const bool has_invalid = count_valid(rgb.mask()) != rgb.mask().size();
  const int ch = has_invalid ? 4 : 3;
  PngImage img{rgb.width(), rgb.height(), ch, 8, {}};
  img.samples.resize(static_cast<std::size_t>(rgb.width()) * rgb.height() * ch, 0);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * rgb.width() + x) * ch;
      for (int c = 0; c < 3; ++c) img.samples[base + c] = rgb.at(x, y)[c];
      if (has_invalid) img.samples[base + 3] = rgb.valid(x, y) ? 255 : 0;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Sidecar and manifest

struct Sidecar {
  UnitVector3 gravity{0.0, 1.0, 0.0};
  CameraIntrinsics intrinsics;
};

inline Sidecar read_sidecar(const fs::path& path) {
  const nlohmann::json j = detail::read_json_file(path);
  if (!j.is_object() || !j.contains("gravity")) throw FormatError(path.string() + ": sidecar needs 'gravity'");
  return Sidecar{detail::gravity_from_json(j["gravity"]), detail::intrinsics_from_json(j)};
}

inline void write_sidecar(const fs::path& path, const Sidecar& s) {
  nlohmann::json j;
  j["gravity"] = detail::gravity_to_json(s.gravity);
  detail::intrinsics_to_json(s.intrinsics, j);
  detail::write_text_file(path, j.dump(2) + "\n");
}

/// Relative paths are resolved against `base_dir`.
inline SampleRecord record_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  if (!j.is_object()) throw FormatError("manifest record must be a JSON object");
  SampleRecord r;
  try {
    r.frame_id = j.at("frame_id").get<std::string>();
    r.rgb_path = detail::resolve(base_dir, j.at("rgb_path").get<std::string>());
    r.depth_path = detail::resolve(base_dir, j.at("depth_path").get<std::string>());
    if (j.contains("normal_path") && !j["normal_path"].is_null()) {
      r.normal_path = detail::resolve(base_dir, j["normal_path"].get<std::string>());
    }
    r.gravity = detail::gravity_from_json(j.at("gravity"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest record: ") + e.what());
  }
  r.intrinsics = detail::intrinsics_from_json(j);
  return r;
}

/// Paths are written relative to `base_dir` when they lie below it.
inline nlohmann::json record_to_json(const SampleRecord& r, const fs::path& base_dir = {}) {
  auto rel = [&](const fs::path& p) {
    if (base_dir.empty()) return p.generic_string();
    const fs::path q = fs::proximate(p, base_dir);
    return (q.empty() || *q.begin() == "..") ? p.generic_string() : q.generic_string();
  };
  nlohmann::json j;
  j["frame_id"] = r.frame_id;
  j["rgb_path"] = rel(r.rgb_path);
  j["depth_path"] = rel(r.depth_path);
  j["normal_path"] = r.normal_path ? nlohmann::json(rel(*r.normal_path)) : nlohmann::json(nullptr);
  j["gravity"] = detail::gravity_to_json(r.gravity);
  detail::intrinsics_to_json(r.intrinsics, j);
  return j;
}

/// JSON lines; blank lines are skipped. An optional first line
/// {"dataset_name": ...} without a frame_id names the dataset.
inline Manifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw FileMissing("manifest not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  Manifest m(path.stem().string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && j.contains("dataset_name") && !j.contains("frame_id")) {
      m.set_dataset_name(j["dataset_name"].get<std::string>());
      continue;
    }
    m.append(record_from_json(j, base));
  }
  return m;
}

inline void write_manifest(const fs::path& path, const Manifest& m) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::string text;
  if (!m.dataset_name().empty()) text += nlohmann::json{{"dataset_name", m.dataset_name()}}.dump() + "\n";
  for (const auto& r : m.records()) text += record_to_json(r, fs::absolute(base)).dump() + "\n";
  detail::write_text_file(path, text);
}

// ---------------------------------------------------------------------------
// Samples

inline FrameBundle load_sample(const SampleRecord& rec, double max_depth = kDefaultMaxDepth) {
  for (const fs::path* p : {&rec.rgb_path, &rec.depth_path}) {
    if (!fs::exists(*p)) throw FileMissing("load_sample: missing " + p->string());
  }
  if (rec.normal_path && !fs::exists(*rec.normal_path)) {
    throw FileMissing("load_sample: missing " + rec.normal_path->string());
  }
  FrameBundle b;
  b.intrinsics = rec.intrinsics;
  b.gravity = rec.gravity;
  b.depth = decode_depth_png(read_png(rec.depth_path), max_depth);
  const int w = b.depth.width();
  const int h = b.depth.height();
  if (w != rec.intrinsics.width || h != rec.intrinsics.height) {
    throw IntrinsicsMismatch("load_sample: depth raster is " + std::to_string(w) + "x" + std::to_string(h) +
                             " but intrinsics say " + std::to_string(rec.intrinsics.width) + "x" +
                             std::to_string(rec.intrinsics.height));
  }
  if (rec.normal_path) {
    b.normals = decode_normal_png(read_png(*rec.normal_path));
    if (b.normals.width() != w || b.normals.height() != h) {
      throw IntrinsicsMismatch("load_sample: normal raster size differs from depth");
    }
  } else {
    b.normals = NormalMap(w, h);
  }
  RgbImage rgb = decode_rgb_png(read_png(rec.rgb_path));
  b.rgb = (rgb.width() == w && rgb.height() == h) ? std::move(rgb) : detail::resize_rgb(rgb, w, h);
  return b;
}

/// Writes <id>_rgb.png, <id>_depth.png, <id>_normal.png and <id>.json into `dir`.
inline SampleRecord write_sample(const FrameBundle& b, const fs::path& dir, const std::string& frame_id) {
  b.validate();
  if (frame_id.empty()) throw InvalidArgument("write_sample: empty frame_id");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("write_sample: cannot create directory " + dir.string());
  SampleRecord r;
  r.frame_id = frame_id;
  r.rgb_path = dir / (frame_id + "_rgb.png");
  r.depth_path = dir / (frame_id + "_depth.png");
  r.normal_path = dir / (frame_id + "_normal.png");
  r.gravity = b.gravity;
  r.intrinsics = b.intrinsics;
  write_png(r.rgb_path, encode_rgb_png(b.rgb));
  write_png(r.depth_path, encode_depth_png(b.depth));
  write_png(*r.normal_path, encode_normal_png(b.normals));
  write_sidecar(dir / (frame_id + ".json"), Sidecar{b.gravity, b.intrinsics});
  return r;
}

// ---------------------------------------------------------------------------
// Normals from depth

struct NormalFitOptions {
  int window = 5;                   // odd side length of the neighborhood
  double relative_threshold = 0.05; // neighbors beyond |d - d_c| > tau * d_c are dropped
  int min_neighbors = 6;            // excluding the center pixel
};

/// Least-squares plane through the back-projected neighborhood of each pixel;
/// the normal is the covariance's smallest eigenvector, oriented toward the camera.
inline NormalMap normals_from_depth(const DepthMap& d, const CameraIntrinsics& k, const NormalFitOptions& options = {}) {
  if (d.width() != k.width || d.height() != k.height) throw SizeMismatch("normals_from_depth: depth/intrinsics size");
  if (options.window < 3 || options.window % 2 == 0) throw InvalidArgument("normals_from_depth: window must be odd >= 3");
  const int r = options.window / 2;
  NormalMap out(d.width(), d.height());
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(options.window) * options.window);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y)) continue;
      const double dc = d.at(x, y);
      pts.clear();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (!d.mask().contains(xx, yy) || !d.valid(xx, yy)) continue;
          const double dn = d.at(xx, yy);
          if (std::abs(dn - dc) > options.relative_threshold * dc) continue;
          pts.push_back(k.back_project(Pixel{static_cast<double>(xx), static_cast<double>(yy)}) * dn);
        }
      }
      if (static_cast<int>(pts.size()) - 1 < options.min_neighbors) continue;
      Vec3 mean = Vec3::Zero();
      for (const auto& p : pts) mean += p;
      mean /= static_cast<double>(pts.size());
      Mat3 cov = Mat3::Zero();
      for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
      Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
      if (es.info() != Eigen::Success) continue;
      const Vec3 ev = es.eigenvalues();  // ascending
      // collinear or coincident points leave the plane undetermined
      if (!(ev[2] > 0.0) || ev[1] <= 1e-9 * ev[2]) continue;
      Vec3 n = es.eigenvectors().col(0);
      const Vec3 center = k.back_project(Pixel{static_cast<double>(x), static_cast<double>(y)}) * dc;
      if (n.dot(center) > 0.0) n = -n;
      out.set(x, y, n);
    }
  }
  return out;
}

}  // namespace msr
