#include "fourierflow/occupancy.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace fourierflow;

namespace {

TriMesh unit_cube() {
  TriMesh mesh;
  mesh.vertices.resize(3, 8);
  for (int c = 0; c < 8; ++c)
    mesh.vertices.col(c) = Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1);
  mesh.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return mesh;
}

double sphere_sdf(const Vec3& p, double radius) { return p.norm() - radius; }

TriMesh sphere_mesh(double radius = 0.1, int resolution = 64) {
  auto field = [radius](const Vec3& p) { return sphere_sdf(p, radius); };
  auto mesh = extract_isosurface(field, Vec3::Constant(-1.5 * radius),
                                 Vec3::Constant(1.5 * radius), resolution, 0.0);
  if (!mesh) throw std::runtime_error("sphere extraction failed");
  return *mesh;
}

// Independent inside test for the dual-oracle check: ray parity by
// plane-intersection with barycentric containment, along a direction the
// library code never uses.
bool parity_inside(const TriMesh& mesh, const Vec3& p) {
  const Vec3 dir = Vec3(0.2479, -0.6211, 0.7437).normalized();
  int crossings = 0;
  for (const auto& tri : mesh.faces) {
    const Vec3 a = mesh.vertices.col(tri[0]);
    const Vec3 b = mesh.vertices.col(tri[1]);
    const Vec3 c = mesh.vertices.col(tri[2]);
    const Vec3 n = (b - a).cross(c - a);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-16) continue;
    const double t = n.dot(a - p) / denom;
    if (t <= 0.0) continue;
    const Vec3 x = p + t * dir;
    const double full = n.norm();
    const double u = (b - x).cross(c - x).dot(n) / (full * full);
    const double v = (c - x).cross(a - x).dot(n) / (full * full);
    const double w = 1.0 - u - v;
    if (u >= 0.0 && v >= 0.0 && w >= 0.0) ++crossings;
  }
  return crossings % 2 == 1;
}

TotalFlow identity_flow(const Skeleton& hand, const TriMesh& bounds) {
  TotalFlow flow;
  flow.skeleton = hand;
  flow.weight_field = build_weight_field(hand, bounds, {12, 12, 12});
  for (int j = 0; j < hand.joint_count(); ++j) {
    FourierSeries3 s = FourierSeries3::zero(6, kTwoPi);
    s.cos_coeffs.col(0) = 2.0 * hand.joints.col(j);
    flow.joint_flow.flows.push_back(s);
  }
  return flow;
}

JointFlow rotating_flow(const Skeleton& s, const Vec3& axis_in, const Vec3& shift) {
  const Vec3 axis = axis_in.normalized();
  JointFlow flow;
  for (int j = 0; j < s.joint_count(); ++j) {
    const Vec3 p = s.joints.col(j);
    const Vec3 axial = axis * axis.dot(p);
    FourierSeries3 f = FourierSeries3::zero(6, kTwoPi);
    f.cos_coeffs.col(0) = 2.0 * (axial + shift);
    f.cos_coeffs.col(1) = p - axial;
    f.sin_coeffs.col(0) = axis.cross(p);
    flow.flows.push_back(f);
  }
  return flow;
}

}  // namespace

TEST(MarchingCubes, TablesAreMutuallyConsistent) {
  for (int i = 0; i < 256; ++i) {
    std::uint16_t used = 0;
    for (int k = 0; detail::kTriTable[i][k] >= 0; ++k)
      used |= std::uint16_t(1) << detail::kTriTable[i][k];
    EXPECT_EQ(used, detail::kEdgeTable[i]) << "case " << i;
  }
}

TEST(MarchingCubes, SphereGeometry) {
  const double radius = 0.1;
  const int resolution = 64;
  const TriMesh mesh = sphere_mesh(radius, resolution);
  EXPECT_TRUE(mesh.is_watertight());

  const double cell = 3.0 * radius / resolution;
  double worst = 0.0;
  for (int v = 0; v < mesh.vertex_count(); ++v)
    worst = std::max(worst, std::abs(mesh.vertices.col(v).norm() - radius));
  EXPECT_LE(worst, 1.5 * cell);

  const double expected = 4.0 / 3.0 * M_PI * radius * radius * radius;
  EXPECT_NEAR(mesh.signed_volume(), expected, 0.05 * expected);
}

TEST(MarchingCubes, AllOutsideFieldIsEmpty) {
  auto field = [](const Vec3&) { return 1.0; };
  EXPECT_FALSE(
      extract_isosurface(field, Vec3::Zero(), Vec3::Ones(), 16, 0.0).has_value());
}

TEST(MarchingCubes, RejectsCoarseResolution) {
  auto field = [](const Vec3& p) { return p.norm() - 0.5; };
  EXPECT_THROW(extract_isosurface(field, Vec3::Zero(), Vec3::Ones(), 7, 0.0),
               std::invalid_argument);
}

TEST(Watertight, DetectsOpenMesh) {
  TriMesh cube = unit_cube();
  EXPECT_TRUE(cube.is_watertight());
  cube.faces.pop_back();
  EXPECT_FALSE(cube.is_watertight());
}

TEST(Occupancy, CubeCentroidInsideFarPointOutside) {
  CanonicalShape shape{unit_cube()};
  shape.validate();
  EXPECT_EQ(occupancy(shape, Vec3(0.5, 0.5, 0.5)), 1);
  EXPECT_EQ(occupancy(shape, Vec3(20, 20, 20)), 0);
}

TEST(Occupancy, AgreesWithIndependentRayParityOracle) {
  const CanonicalShape shape{sphere_mesh(0.1, 32)};
  Rng rng(47);
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p = rng.uniform_in_box(Vec3::Constant(-0.2), Vec3::Constant(0.2));
    ++checked;
    EXPECT_EQ(occupancy(shape, p) == 1, parity_inside(shape.mesh, p)) << p.transpose();
  }
  EXPECT_EQ(checked, 10000);
}

TEST(Occupancy, RigidInvariance) {
  const CanonicalShape shape{sphere_mesh(0.1, 24)};
  RigidTransform g;
  g.rotation = Eigen::AngleAxisd(0.9, Vec3(1, 2, -1).normalized()).toRotationMatrix();
  g.translation = Vec3(0.3, -0.1, 0.2);
  CanonicalShape moved = shape;
  for (int v = 0; v < moved.mesh.vertex_count(); ++v)
    moved.mesh.vertices.col(v) = g.apply(shape.mesh.vertices.col(v));
  Rng rng(53);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p = rng.uniform_in_box(Vec3::Constant(-0.15), Vec3::Constant(0.15));
    if (std::abs(p.norm() - 0.1) < 1e-3) continue;  // skip the surface band
    EXPECT_EQ(occupancy(shape, p), occupancy(moved, g.apply(p)));
  }
}

TEST(Reconstruct, IdentityFlowIsBitIdentical) {
  const Skeleton hand = default_hand_skeleton();
  const CanonicalShape shape{sphere_mesh(0.06, 16)};
  const TotalFlow flow = identity_flow(hand, shape.mesh);
  const ReconstructedSequence seq =
      reconstruct_sequence(flow, shape, {0.0, 0.25, 0.5, 0.75});
  for (const auto& mesh : seq.meshes) {
    EXPECT_EQ(mesh.vertices, shape.mesh.vertices);
    EXPECT_EQ(mesh.faces, shape.mesh.faces);
  }
}

TEST(Reconstruct, GlobalRigidFlowMovesMeshRigidly) {
  const Skeleton hand = default_hand_skeleton();
  CanonicalShape shape{sphere_mesh(0.05, 16)};
  // Center the sphere template within the hand volume.
  shape.mesh.vertices.colwise() += Vec3(0.0, 0.05, 0.0);
  TotalFlow flow = identity_flow(hand, shape.mesh);
  const Vec3 axis = Vec3(0.1, 0.3, 1.0).normalized();
  const Vec3 shift(0.02, 0.01, -0.03);
  flow.joint_flow = rotating_flow(hand, axis, shift);

  const std::vector<double> times{0.0, 0.3, 0.65};
  const ReconstructedSequence seq = reconstruct_sequence(flow, shape, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Mat3 rot =
        Eigen::AngleAxisd(kTwoPi * times[k], axis).toRotationMatrix();
    for (int v = 0; v < shape.mesh.vertex_count(); ++v) {
      const Vec3 expected = rot * shape.mesh.vertices.col(v) + shift;
      EXPECT_LT((seq.meshes[k].vertices.col(v) - expected).norm(), 1e-8);
    }
  }
}

TEST(PropagateOccupancy, ValuesTravelUnchanged) {
  const Skeleton hand = default_hand_skeleton();
  const CanonicalShape shape{sphere_mesh(0.05, 16)};
  TotalFlow flow = identity_flow(hand, shape.mesh);
  Rng rng(59);
  Points3 pts(3, 500);
  for (int i = 0; i < 500; ++i)
    pts.col(i) = rng.uniform_in_box(Vec3::Constant(-0.08), Vec3::Constant(0.08));
  const std::vector<int> canonical = occupancy_batch(shape, pts);

  auto [identity_pos, identity_occ] = propagate_occupancy(flow, shape, pts, 0.4);
  EXPECT_EQ(identity_pos, pts);
  EXPECT_EQ(identity_occ, canonical);

  const Vec3 axis(0, 1, 0);
  flow.joint_flow = rotating_flow(hand, axis, Vec3(0.05, 0, 0));
  auto [moved_pos, moved_occ] = propagate_occupancy(flow, shape, pts, 0.3);
  EXPECT_EQ(moved_occ, canonical);

  // Flowed inside points must be inside the rigidly moved mesh.
  CanonicalShape moved_shape = shape;
  const Mat3 rot = Eigen::AngleAxisd(kTwoPi * 0.3, axis).toRotationMatrix();
  for (int v = 0; v < moved_shape.mesh.vertex_count(); ++v)
    moved_shape.mesh.vertices.col(v) =
        rot * shape.mesh.vertices.col(v) + Vec3(0.05, 0, 0);
  int agree = 0, total = 0;
  for (int i = 0; i < 500; ++i) {
    const double sdf = shape.mesh.vertices.col(0).norm();  // unused scale guard
    (void)sdf;
    ++total;
    if (occupancy(moved_shape, moved_pos.col(i)) == canonical[i]) ++agree;
  }
  EXPECT_GE(double(agree) / total, 0.999);
}

TEST(TransferAttributes, CopiesByVertexIndex) {
  const Skeleton hand = default_hand_skeleton();
  CanonicalShape shape{sphere_mesh(0.05, 16)};
  shape.mesh.attributes.resize(3, shape.mesh.vertex_count());
  for (int v = 0; v < shape.mesh.vertex_count(); ++v)
    shape.mesh.attributes.col(v) =
        (shape.mesh.vertices.col(v) / 0.1).array() * 0.5 + 0.5;

  TotalFlow flow_a = identity_flow(hand, shape.mesh);
  TotalFlow flow_b = flow_a;
  flow_b.joint_flow = rotating_flow(hand, Vec3(0, 0, 1), Vec3::Zero());

  const std::vector<double> times{0.0, 0.5};
  const ReconstructedSequence seq_a =
      transfer_attributes(reconstruct_sequence(flow_a, shape, times), shape);
  const ReconstructedSequence seq_b =
      transfer_attributes(reconstruct_sequence(flow_b, shape, times), shape);
  for (const auto& seq : {seq_a, seq_b})
    for (const auto& mesh : seq.meshes)
      EXPECT_EQ(mesh.attributes, shape.mesh.attributes);

  CanonicalShape bare{sphere_mesh(0.05, 16)};
  EXPECT_THROW(transfer_attributes(seq_a, bare), std::invalid_argument);
}

TEST(MeshIo, ObjRoundTripWithColors) {
  CanonicalShape shape{unit_cube()};
  shape.mesh.attributes.resize(3, 8);
  for (int v = 0; v < 8; ++v) shape.mesh.attributes.col(v) = shape.mesh.vertices.col(v);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ff_test_mesh.obj").string();
  save_obj(shape.mesh, path);
  const TriMesh back = load_obj(path);
  std::remove(path.c_str());
  EXPECT_EQ(back.vertices, shape.mesh.vertices);
  EXPECT_EQ(back.faces, shape.mesh.faces);
  EXPECT_EQ(back.attributes, shape.mesh.attributes);
}

TEST(MeshIo, PlyRoundTrip) {
  const TriMesh mesh = sphere_mesh(0.1, 16);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ff_test_mesh.ply").string();
  save_ply(mesh, path);
  const TriMesh back = load_ply(path);
  std::remove(path.c_str());
  EXPECT_EQ(back.vertices, mesh.vertices);
  EXPECT_EQ(back.faces, mesh.faces);
}

TEST(ManifestJson, RoundTrip) {
  SequenceManifest m;
  m.times = {0.0, 0.5, 1.0};
  m.files = {"frame_000.obj", "frame_001.obj", "frame_002.obj"};
  nlohmann::json j = m;
  const SequenceManifest back = j.get<SequenceManifest>();
  EXPECT_EQ(back.times, m.times);
  EXPECT_EQ(back.files, m.files);
}
