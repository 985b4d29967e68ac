// Renders a steeply tilted view, rectifies it to the nearest of two reference
// directions, runs the ground-truth oracle on the rectified image and maps the
// prediction back. Prints the depth error of the round trip.

#include <iostream>

#include "msr/msr.hpp"

int main() {
  const auto k = msr::CameraIntrinsics::centered(320, 240, 240.0);
  const msr::Scene scene = msr::reference_scene();
  const msr::CameraPose pose{msr::tilt_rotation(70.0, msr::TiltAxis::Pitch), msr::Vec3::Zero()};
  const msr::FrameBundle frame = msr::render_view(scene, k, pose);

  const msr::ReferenceSet refs({msr::UnitVector3(0.0, 1.0, 0.0), msr::tilted_gravity(80.0, msr::TiltAxis::Pitch)});
  const msr::OraclePredictor oracle(scene, pose, msr::GeometryKind::Depth);
  const msr::RectifyResult res = msr::rectify_predict(frame, refs, oracle, frame.gravity);

  const auto m = msr::depth_metrics(frame.depth, std::get<msr::DepthMap>(res.prediction));
  std::cout << "mode " << res.assignment.chosen << ", rectified valid fraction " << res.rectified_valid_fraction
            << ", abs_rel " << m.abs_rel << " over " << m.count << " pixels\n";
  return 0;
}
