#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>
#include <random>

#include "polar6d/losses.hpp"
#include "support/fixtures.hpp"

using namespace polar6d;
namespace fx = polar6d::fixtures;

namespace {

std::mt19937_64 g_rng(2024);

double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g_rng);
}

Eigen::Matrix3d random_rotation() {
    Eigen::Vector3d axis(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
    if (axis.norm() < 1e-6) axis = Eigen::Vector3d::UnitX();
    return Eigen::AngleAxisd(uniform(0, kPi), axis.normalized()).toRotationMatrix();
}

Pose random_pose() {
    Pose p;
    p.rotation = random_rotation();
    p.translation = {uniform(-0.2, 0.2), uniform(-0.2, 0.2), uniform(0.3, 1.5)};
    return p;
}

Mesh unit_cube_points() {
    Mesh mesh;
    for (int i = 0; i < 8; ++i)
        mesh.vertices.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
    mesh.vertex_normals.assign(8, Eigen::Vector3d::UnitZ());
    mesh.faces = {{0, 1, 2}};
    finalize_mesh(mesh);
    return mesh;
}

// Independent brute-force references, written loop-by-loop from scratch.
double ref_loss_rotation(const Eigen::Matrix3d& rg, const Eigen::Matrix3d& rp,
                         const Mesh& mesh) {
    double best = 1e300;
    for (const auto& s : mesh.symmetries) {
        double total = 0.0;
        for (const auto& x : mesh.model_points) {
            Eigen::Vector3d a = rg * s * x, b = rp * x;
            total += std::abs(a.x() - b.x()) + std::abs(a.y() - b.y()) + std::abs(a.z() - b.z());
        }
        total /= mesh.model_points.size();
        if (total < best) best = total;
    }
    return best;
}

double ref_add(const Pose& gt, const Pose& pred, const Mesh& mesh) {
    double total = 0.0;
    for (const auto& x : mesh.model_points)
        total += ((gt.rotation * x + gt.translation) - (pred.rotation * x + pred.translation))
                     .norm();
    return total / mesh.model_points.size();
}

double ref_adds(const Pose& gt, const Pose& pred, const Mesh& mesh) {
    double total = 0.0;
    for (const auto& x : mesh.model_points) {
        Eigen::Vector3d a = gt.rotation * x + gt.translation;
        double best = 1e300;
        for (const auto& y : mesh.model_points) {
            double d = (a - (pred.rotation * y + pred.translation)).norm();
            if (d < best) best = d;
        }
        total += best;
    }
    return total / mesh.model_points.size();
}

} // namespace

TEST_CASE("loss_rotation") {
    Mesh cube = unit_cube_points();
    Eigen::Matrix3d r = random_rotation();
    CHECK(loss_rotation(r, r, cube) == Catch::Approx(0.0).margin(1e-12));

    SECTION("symmetry minimum") {
        Mesh sym = cube;
        Eigen::Matrix3d flip =
            Eigen::AngleAxisd(kPi, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        sym.symmetries.push_back(flip);
        Eigen::Matrix3d pred = r * flip;
        CHECK(loss_rotation(r, pred, sym) == Catch::Approx(0.0).margin(1e-9));
        // invariant under composing the ground truth with a listed symmetry
        Eigen::Matrix3d pred2 = random_rotation();
        CHECK(loss_rotation(r, pred2, sym) ==
              Catch::Approx(loss_rotation(r * flip, pred2, sym)).margin(1e-12));
    }
    SECTION("matches the brute-force reference") {
        Mesh sym = cube;
        sym.symmetries.push_back(
            Eigen::AngleAxisd(kPi / 2.0, Eigen::Vector3d::UnitY()).toRotationMatrix());
        for (int i = 0; i < 100; ++i) {
            Eigen::Matrix3d a = random_rotation(), b = random_rotation();
            CHECK(loss_rotation(a, b, sym) ==
                  Catch::Approx(ref_loss_rotation(a, b, sym)).margin(1e-12));
        }
    }
    SECTION("10-degree x-rotation fixture") {
        Eigen::Matrix3d rot10 =
            Eigen::AngleAxisd(10.0 * kPi / 180.0, Eigen::Vector3d::UnitX()).toRotationMatrix();
        Eigen::Matrix3d gt = Eigen::Matrix3d::Identity();
        CHECK(loss_rotation(gt, gt * rot10, cube) ==
              Catch::Approx(ref_loss_rotation(gt, gt * rot10, cube)).margin(1e-15));
    }
}

TEST_CASE("scalar pose losses") {
    CHECK(loss_center({0.1, -0.2, 1.0}, {0.0, 0.0, 1.0}) == Catch::Approx(0.3));
    CHECK(loss_center({0.4, 0.4, 1.0}, {0.4, 0.4, 2.0}) == 0.0);
    CHECK(loss_z(1.0, 1.25) == Catch::Approx(0.25));
    CHECK(loss_z(0.7, 0.7) == 0.0);
    for (int i = 0; i < 100; ++i) {
        CenterOffsets a{uniform(-1, 1), uniform(-1, 1), uniform(0.1, 2)};
        CenterOffsets b{uniform(-1, 1), uniform(-1, 1), uniform(0.1, 2)};
        CHECK(loss_center(a, b) ==
              Catch::Approx(std::abs(a.dx - b.dx) + std::abs(a.dy - b.dy)).margin(1e-15));
        CHECK(loss_z(a.dz, b.dz) == Catch::Approx(std::abs(a.dz - b.dz)).margin(1e-15));
    }
}

TEST_CASE("geometric losses") {
    SECTION("loss_mask") {
        Image<double> ones(4, 4, 1.0), zeros(4, 4, 0.0);
        CHECK(loss_mask(ones, ones) == 0.0);
        CHECK(loss_mask(ones, zeros) == Catch::Approx(1.0));
        for (int i = 0; i < 100; ++i) {
            Image<double> a(3, 3), b(3, 3);
            double ref = 0.0;
            for (size_t p = 0; p < 9; ++p) {
                a[p] = uniform(0, 1);
                b[p] = uniform(0, 1);
                ref += std::abs(a[p] - b[p]);
            }
            CHECK(loss_mask(a, b) == Catch::Approx(ref / 9.0).margin(1e-12));
        }
    }
    SECTION("loss_xyz") {
        Mask mask(3, 3, 1);
        mask(1, 1) = 0;
        Image<Eigen::Vector3d> a(3, 3), b(3, 3);
        double ref = 0.0;
        for (size_t p = 0; p < 9; ++p) {
            a[p] = {uniform(0, 1), uniform(0, 1), uniform(0, 1)};
            b[p] = {uniform(0, 1), uniform(0, 1), uniform(0, 1)};
            if (mask[p]) ref += (a[p] - b[p]).cwiseAbs().sum();
        }
        MaskedLossResult r = loss_xyz(mask, a, b);
        CHECK(!r.empty_mask);
        CHECK(r.value == Catch::Approx(ref / 8.0).margin(1e-12));
        CHECK(loss_xyz(mask, a, a).value == 0.0);

        Mask none(3, 3, 0);
        MaskedLossResult empty = loss_xyz(none, a, b);
        CHECK(empty.empty_mask);
        CHECK(empty.value == 0.0);
    }
    SECTION("loss_normal") {
        Mask mask(2, 2, 1);
        Image<Eigen::Vector3d> up(2, 2, Eigen::Vector3d::UnitZ());
        Image<Eigen::Vector3d> down(2, 2, -Eigen::Vector3d::UnitZ());
        CHECK(loss_normal(up, up, mask).value == 0.0);
        CHECK(loss_normal(up, down, mask).value == Catch::Approx(2.0));
        Image<Eigen::Vector3d> tilted(
            2, 2, Eigen::Vector3d(std::sin(kPi / 3.0), 0, std::cos(kPi / 3.0)));
        CHECK(loss_normal(up, tilted, mask).value == Catch::Approx(0.5).margin(1e-12));
    }
}

TEST_CASE("pseudo_loss composition") {
    LossWeights w;
    w.lambda1 = 0.0;
    CHECK(pseudo_loss(1, 2, 3, 0.1, 0.2, 0.3, w) == Catch::Approx(0.6));
    w.lambda1 = 2.0;
    CHECK(pseudo_loss(1, 2, 3, 0.1, 0.2, 0.3, w) == Catch::Approx(12.6));
    CHECK(pseudo_loss(0, 0, 0, 0, 0, 0, w) == 0.0);
    for (int i = 0; i < 50; ++i) {
        double t[6];
        for (double& v : t) v = uniform(0, 2);
        w.lambda1 = uniform(0, 3);
        CHECK(pseudo_loss(t[0], t[1], t[2], t[3], t[4], t[5], w) ==
              Catch::Approx(w.lambda1 * (t[0] + t[1] + t[2]) + t[3] + t[4] + t[5])
                  .margin(1e-12));
    }
    CHECK(lambda1_from_geo(0.0) == 1.0);
    CHECK(lambda1_from_geo(1e9) < 1e-12);
}

TEST_CASE("ADD and ADD-S metrics") {
    Mesh cube = unit_cube_points();
    Pose gt = random_pose();
    CHECK(add_metric(gt, gt, cube) == 0.0);
    CHECK(adds_metric(gt, gt, cube) == 0.0);

    SECTION("pure translation shift") {
        Pose pred = gt;
        pred.translation += Eigen::Vector3d(0.01, 0, 0);
        CHECK(add_metric(gt, pred, cube) == Catch::Approx(0.01).margin(1e-15));
    }
    SECTION("brute-force oracle and ADD-S <= ADD") {
        for (int i = 0; i < 200; ++i) {
            Pose a = random_pose(), b = random_pose();
            double add = add_metric(a, b, cube);
            double adds = adds_metric(a, b, cube);
            CHECK(add == Catch::Approx(ref_add(a, b, cube)).margin(1e-12));
            CHECK(adds == Catch::Approx(ref_adds(a, b, cube)).margin(1e-12));
            CHECK(adds <= add + 1e-12);
        }
    }
    SECTION("invariant under an object-frame change applied consistently") {
        Pose a = random_pose(), b = random_pose();
        Pose rig = random_pose();
        Mesh moved = cube;
        for (auto& p : moved.model_points) p = rig.apply(p);
        auto compose = [&](const Pose& outer) {
            Pose c;
            c.rotation = outer.rotation * rig.rotation.transpose();
            c.translation = outer.translation - c.rotation * rig.translation;
            return c;
        };
        CHECK(add_metric(compose(a), compose(b), moved) ==
              Catch::Approx(add_metric(a, b, cube)).margin(1e-9));
    }
}

TEST_CASE("add_recall") {
    CHECK(add_recall({0, 0, 0}, 1.0) == 100.0);
    CHECK(add_recall({1.0, 1.0}, 1.0) == 0.0);
    CHECK(add_recall({0.05, 0.5}, 1.0) == 50.0);
}

TEST_CASE("center-offset parametrization round-trips") {
    Camera cam = fx::make_camera();
    Crop crop{70.0, 50.0, 64.0};

    SECTION("object center at the crop center") {
        Pose pose;
        pose.translation = {(70.0 - cam.cx) / cam.fx * 0.8, (50.0 - cam.cy) / cam.fy * 0.8, 0.8};
        CenterOffsets off = pose_to_offsets(pose, cam, crop);
        CHECK(off.dx == Catch::Approx(0.0).margin(1e-12));
        CHECK(off.dy == Catch::Approx(0.0).margin(1e-12));
        CHECK(off.dz == Catch::Approx(0.8));
    }
    SECTION("hand-built projection case") {
        Pose pose;
        pose.translation = {0.1, -0.05, 1.0};
        CenterOffsets off = pose_to_offsets(pose, cam, crop);
        CHECK(off.dx == Catch::Approx((cam.fx * 0.1 + cam.cx - 70.0) / 64.0).margin(1e-12));
        CHECK(off.dy == Catch::Approx((cam.fy * -0.05 + cam.cy - 50.0) / 64.0).margin(1e-12));
    }
    SECTION("round-trip identity") {
        for (int i = 0; i < 100; ++i) {
            Pose pose = random_pose();
            CenterOffsets off = pose_to_offsets(pose, cam, crop);
            Pose back = offsets_to_pose(off, pose.rotation, cam, crop);
            CHECK((back.translation - pose.translation).norm() < 1e-9);
        }
    }
    SECTION("zero-area crop rejected") {
        CHECK_THROWS_AS(pose_to_offsets(random_pose(), cam, Crop{0, 0, 0.0}),
                        std::invalid_argument);
    }
}
