// msr: command-line front end for clustering, rectification, rendering,
// evaluation and the oracle equivariance demo.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "msr/msr.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

msr::TiltAxis parse_axis(const std::string& s) {
  if (s == "pitch") return msr::TiltAxis::Pitch;
  if (s == "roll") return msr::TiltAxis::Roll;
  throw UsageError("--axis must be 'roll' or 'pitch'");
}

std::vector<msr::SampleRecord> sorted_records(const msr::Manifest& m) {
  std::vector<msr::SampleRecord> recs = m.records();
  std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
  return recs;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw msr::IoError("cannot create directory " + dir.string());
}

std::string format_angle(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", a);
  return buf;
}

// Evaluation pools every frame's pixels into one 1-row map so metrics are
// computed over all pixels at once rather than averaged per frame.
std::size_t pixel_total(const std::vector<msr::FrameBundle>& frames) {
  std::size_t total = 0;
  for (const auto& f : frames) total += static_cast<std::size_t>(f.width()) * f.height();
  return total;
}

std::pair<std::vector<msr::FrameBundle>, std::vector<msr::FrameBundle>> load_pairs(const fs::path& gt_path,
                                                                                    const fs::path& pred_path) {
  const msr::Manifest gt = msr::read_manifest(gt_path);
  const msr::Manifest pred = msr::read_manifest(pred_path);
  std::vector<msr::FrameBundle> a;
  std::vector<msr::FrameBundle> b;
  for (const auto& rec : sorted_records(gt)) {
    const msr::SampleRecord* p = pred.find(rec.frame_id);
    if (p == nullptr) throw msr::InvalidArgument("prediction manifest has no frame '" + rec.frame_id + "'");
    a.push_back(msr::load_sample(rec));
    b.push_back(msr::load_sample(*p));
    if (a.back().width() != b.back().width() || a.back().height() != b.back().height()) {
      throw msr::SizeMismatch("frame '" + rec.frame_id + "': prediction and ground truth differ in size");
    }
  }
  if (a.empty()) throw msr::EmptyInput("ground-truth manifest is empty");
  return {std::move(a), std::move(b)};
}

msr::DepthMap pooled_depth(const std::vector<msr::FrameBundle>& frames) {
  const int n = static_cast<int>(pixel_total(frames));
  msr::DepthMap out(n, 1, frames.front().depth.max_depth());
  int i = 0;
  for (const auto& f : frames)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x, ++i) out.set_unchecked(i, 0, f.depth.at(x, y), f.depth.valid(x, y));
  return out;
}

msr::NormalMap pooled_normals(const std::vector<msr::FrameBundle>& frames) {
  const int n = static_cast<int>(pixel_total(frames));
  msr::NormalMap out(n, 1);
  int i = 0;
  for (const auto& f : frames)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x, ++i)
        if (f.normals.valid(x, y)) out.set(i, 0, f.normals.at(x, y));
  return out;
}

json matrix_json(const msr::Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

std::vector<msr::UnitVector3> read_gravity_list(const fs::path& path) {
  const json j = msr::detail::read_json_file(path);
  const json& arr = j.is_object() ? j.at("gravities") : j;
  if (!arr.is_array()) throw msr::FormatError(path.string() + ": expected an array of gravity vectors");
  std::vector<msr::UnitVector3> out;
  for (const auto& g : arr) out.push_back(msr::detail::gravity_from_json(g));
  return out;
}

void write_json(const fs::path& path, const json& j) { msr::detail::write_text_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

int cmd_cluster_refs(const std::string& manifest, const std::string& gravities, double delta, std::uint64_t seed,
                     const std::string& out) {
  if (manifest.empty() == gravities.empty()) throw UsageError("give exactly one of --manifest or --gravities");
  std::vector<msr::UnitVector3> gs;
  if (!manifest.empty()) {
    for (const auto& rec : msr::read_manifest(manifest).records()) gs.push_back(rec.gravity);
  } else {
    gs = read_gravity_list(gravities);
  }
  const msr::ReferenceSet refs = msr::cluster_references(gs, delta, seed);
  write_json(out, msr::to_json(refs));
  std::cout << json{{"k", refs.size()}, {"deviation", refs.deviation()}, {"n", gs.size()}}.dump() << "\n";
  return kExitOk;
}

int cmd_rectify(const std::string& manifest_path, const std::string& refs_path, const std::string& out_dir,
                bool refine_principal) {
  const msr::Manifest manifest = msr::read_manifest(manifest_path);
  msr::ReferenceSet refs = msr::reference_set_from_json(msr::detail::read_json_file(refs_path));
  const auto records = sorted_records(manifest);
  ensure_dir(out_dir);

  std::vector<msr::FrameBundle> frames;
  frames.reserve(records.size());
  for (const auto& rec : records) frames.push_back(msr::load_sample(rec));

  if (refine_principal) {
    std::vector<msr::NormalSample> samples;
    std::vector<msr::UnitVector3> gravities;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      samples.push_back(msr::sample_from_normal_map(frames[i].normals, records[i].frame_id));
      gravities.push_back(frames[i].gravity);
    }
    refs.set_per_mode_q(msr::mode_distributions(samples, gravities, refs));
  }

  msr::Manifest out(manifest.dataset_name().empty() ? "rectified" : manifest.dataset_name() + "_rectified");
  json modes = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& b = frames[i];
    msr::Rotation3 r;
    std::size_t mode = 0;
    json extra;
    if (refine_principal) {
      const auto est = msr::estimate_principal(msr::sample_from_normal_map(b.normals), b.gravity, refs);
      r = est.rotation;
      mode = est.mode;
      extra = {{"principal", json::array({est.direction.x(), est.direction.y(), est.direction.z()})},
               {"initial_kl", est.initial_kl},
               {"final_kl", est.final_kl}};
    } else {
      mode = msr::assign_mode(b.gravity, refs).chosen;
      r = msr::rotation_between(b.gravity, refs[mode]);
    }
    const msr::FrameBundle warped = msr::warp_bundle(b, r);
    out.append(msr::write_sample(warped, out_dir, records[i].frame_id));
    json entry{{"frame_id", records[i].frame_id},
               {"mode", mode},
               {"reference", json::array({refs[mode].x(), refs[mode].y(), refs[mode].z()})},
               {"rotation", matrix_json(r.matrix())},
               {"valid_fraction", warped.depth.valid_fraction()}};
    if (!extra.is_null()) entry.update(extra);
    modes.push_back(std::move(entry));
  }
  msr::write_manifest(fs::path(out_dir) / "manifest.jsonl", out);
  write_json(fs::path(out_dir) / "modes.json", json{{"frames", modes}});
  return kExitOk;
}

int cmd_render(const std::string& scene_path, const std::vector<double>& angles, const std::string& axis_name,
               const std::string& out_dir, int width, int height, double focal) {
  const msr::TiltAxis axis = parse_axis(axis_name);
  if (angles.empty()) throw UsageError("--angles needs at least one value");
  if (width < 1 || height < 1) throw UsageError("--width and --height must be positive");
  const msr::Scene scene = scene_path.empty() ? msr::reference_scene()
                                              : msr::scene_from_json(msr::detail::read_json_file(scene_path));
  const double f = focal > 0.0 ? focal : 0.75 * width;
  const auto k = msr::CameraIntrinsics::centered(width, height, f);
  ensure_dir(out_dir);
  msr::Manifest m("render_" + axis_name);
  for (double a : angles) {
    if (!std::isfinite(a)) throw UsageError("--angles must be finite");
    const auto b = msr::render_view(scene, k, msr::CameraPose{msr::tilt_rotation(a, axis), msr::Vec3::Zero()});
    m.append(msr::write_sample(b, out_dir, axis_name + "_" + format_angle(a)));
  }
  msr::write_manifest(fs::path(out_dir) / "manifest.jsonl", m);
  write_json(fs::path(out_dir) / "scene.json", msr::to_json(scene));
  return kExitOk;
}

int cmd_eval_depth(const std::string& gt_path, const std::string& pred_path, bool scale_align,
                   const std::string& sq_rel) {
  auto [gt, pred] = load_pairs(gt_path, pred_path);
  msr::DepthMetricOptions opt;
  if (sq_rel == "depth_squared") {
    opt.sq_rel_denominator = msr::SqRelDenominator::DepthSquared;
  } else if (sq_rel != "depth") {
    throw UsageError("--sq-rel must be 'depth' or 'depth_squared'");
  }
  const msr::DepthMap g = pooled_depth(gt);
  const msr::DepthMap p = pooled_depth(pred);
  if (scale_align) opt.pred_scale = msr::scale_align(g, p);
  json j = msr::to_json(msr::depth_metrics(g, p, opt));
  j["frames"] = gt.size();
  if (scale_align) j["scale"] = opt.pred_scale;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_eval_normal(const std::string& gt_path, const std::string& pred_path) {
  auto [gt, pred] = load_pairs(gt_path, pred_path);
  json j = msr::to_json(msr::normal_metrics(pooled_normals(gt), pooled_normals(pred)));
  j["frames"] = gt.size();
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_normals_from_depth(const std::string& manifest_path, const std::string& out_dir) {
  const msr::Manifest manifest = msr::read_manifest(manifest_path);
  ensure_dir(out_dir);
  msr::Manifest out(manifest.dataset_name());
  for (const auto& rec : sorted_records(manifest)) {
    msr::FrameBundle b = msr::load_sample(rec);
    b.normals = msr::normals_from_depth(b.depth, b.intrinsics);
    out.append(msr::write_sample(b, out_dir, rec.frame_id));
  }
  msr::write_manifest(fs::path(out_dir) / "manifest.jsonl", out);
  return kExitOk;
}

int cmd_demo_equivariance(const std::vector<double>& angles, const std::string& axis_name, const std::string& refs_path,
                          int width, int height) {
  const msr::TiltAxis axis = parse_axis(axis_name);
  if (angles.empty()) throw UsageError("--angles needs at least one value");
  const auto k = msr::CameraIntrinsics::centered(width, height, 0.75 * width);
  const msr::ReferenceSet refs =
      refs_path.empty()
          ? msr::ReferenceSet({msr::UnitVector3(0.0, 1.0, 0.0), msr::tilted_gravity(80.0, msr::TiltAxis::Pitch)})
          : msr::reference_set_from_json(msr::detail::read_json_file(refs_path));
  const msr::Scene scene = msr::reference_scene();
  for (double a : angles) {
    const msr::CameraPose pose{msr::tilt_rotation(a, axis), msr::Vec3::Zero()};
    const msr::FrameBundle b = msr::render_view(scene, k, pose);
    const msr::OraclePredictor depth_oracle(scene, pose, msr::GeometryKind::Depth);
    const msr::OraclePredictor normal_oracle(scene, pose, msr::GeometryKind::Normal);
    const auto rd = msr::rectify_predict(b, refs, depth_oracle, b.gravity);
    const auto rn = msr::rectify_predict(b, refs, normal_oracle, b.gravity);
    json line{{"angle", a},
              {"axis", axis_name},
              {"mode", rd.assignment.chosen},
              {"rectified_valid_fraction", rd.rectified_valid_fraction},
              {"depth", msr::to_json(msr::depth_metrics(b.depth, std::get<msr::DepthMap>(rd.prediction)))},
              {"normal", msr::to_json(msr::normal_metrics(b.normals, std::get<msr::NormalMap>(rn.prediction)))}};
    std::cout << line.dump() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal spatial rectification toolkit"};
  app.require_subcommand(1);

  std::string manifest, gravities, out, refs, out_dir, scene, axis = "pitch", gt_manifest, pred_manifest;
  std::string sq_rel = "depth";
  double delta = 0.0;
  double focal = 0.0;
  std::uint64_t seed = 0;
  bool refine = false;
  bool align = false;
  int width = 320;
  int height = 240;
  std::vector<double> angles;

  auto* cluster = app.add_subcommand("cluster-refs", "Cluster gravity directions into reference directions");
  auto* cm = cluster->add_option("--manifest", manifest, "Manifest whose gravities are clustered");
  cluster->add_option("--gravities", gravities, "JSON array of [x,y,z] gravities (alternative to --manifest)")
      ->excludes(cm);
  cluster->add_option("--delta", delta, "Mean squared chordal deviation threshold")->required();
  cluster->add_option("--seed", seed, "Seed for the clustering start point");
  cluster->add_option("--out", out, "Output refs.json")->required();

  auto* rectify = app.add_subcommand("rectify", "Warp every frame to its nearest reference direction");
  rectify->add_option("--manifest", manifest)->required();
  rectify->add_option("--refs", refs)->required();
  rectify->add_option("--out-dir", out_dir)->required();
  rectify->add_flag("--refine-principal", refine, "Refine each rotation by KL histogram matching");

  auto* render = app.add_subcommand("render", "Render a synthetic scene at a sweep of tilts");
  render->add_option("--scene", scene, "scene.json (default: built-in reference scene)");
  render->add_option("--angles", angles, "Comma-separated tilt angles in degrees")->required()->delimiter(',');
  render->add_option("--axis", axis, "roll or pitch");
  render->add_option("--out-dir", out_dir)->required();
  render->add_option("--width", width);
  render->add_option("--height", height);
  render->add_option("--fx", focal, "Focal length in pixels (default 0.75 * width)");

  auto* eval_depth = app.add_subcommand("eval-depth", "Depth metrics pooled over all frames");
  eval_depth->add_option("--gt-manifest", gt_manifest)->required();
  eval_depth->add_option("--pred-manifest", pred_manifest)->required();
  eval_depth->add_flag("--scale-align", align, "Apply one least-squares scale to all predictions");
  eval_depth->add_option("--sq-rel", sq_rel, "Sq. Rel denominator: depth or depth_squared");

  auto* eval_normal = app.add_subcommand("eval-normal", "Surface normal metrics pooled over all frames");
  eval_normal->add_option("--gt-manifest", gt_manifest)->required();
  eval_normal->add_option("--pred-manifest", pred_manifest)->required();

  auto* nfd = app.add_subcommand("normals-from-depth", "Replace each frame's normals by plane fits to its depth");
  nfd->add_option("--manifest", manifest)->required();
  nfd->add_option("--out-dir", out_dir)->required();

  auto* demo = app.add_subcommand("demo-equivariance", "Oracle rectify-predict-unwarp metrics per tilt angle");
  demo->add_option("--angles", angles)->required()->delimiter(',');
  demo->add_option("--axis", axis);
  demo->add_option("--refs", refs, "refs.json (default: pitch 0 and 80 degrees)");
  demo->add_option("--width", width);
  demo->add_option("--height", height);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*cluster) return cmd_cluster_refs(manifest, gravities, delta, seed, out);
    if (*rectify) return cmd_rectify(manifest, refs, out_dir, refine);
    if (*render) return cmd_render(scene, angles, axis, out_dir, width, height, focal);
    if (*eval_depth) return cmd_eval_depth(gt_manifest, pred_manifest, align, sq_rel);
    if (*eval_normal) return cmd_eval_normal(gt_manifest, pred_manifest);
    if (*nfd) return cmd_normals_from_depth(manifest, out_dir);
    if (*demo) return cmd_demo_equivariance(angles, axis, refs, width, height);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const msr::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const msr::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
