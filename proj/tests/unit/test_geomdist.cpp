#include <doctest.h>

#include "../support/oracles.hpp"
#include "hyperreg/errors.hpp"
#include "hyperreg/geomdist.hpp"

using namespace hyperreg;
using namespace hyperreg::testing;

TEST_CASE("closest point on a triangle: symmetric cases") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  const auto at_a = closest_point_triangle(a, a, b, c);
  CHECK(at_a.point == a);
  CHECK(at_a.barycentric == Vec3(1, 0, 0));

  const Vec3 centroid = (a + b + c) / 3.0;
  const auto above = closest_point_triangle(centroid + Vec3(0, 0, 2.5), a, b, c);
  CHECK((above.point - centroid).norm() < 1e-15);
  CHECK((above.barycentric - Vec3::Constant(1.0 / 3.0)).norm() < 1e-15);

  const auto beyond_edge = closest_point_triangle(Vec3(0.5, -1, 0.3), a, b, c);
  CHECK((beyond_edge.point - Vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK(beyond_edge.barycentric[2] == 0.0);
}

TEST_CASE("closest point on degenerate triangles") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(2, 0, 0);
  const auto r = closest_point_triangle(Vec3(1.5, 1, 0), a, b, c);
  CHECK((r.point - Vec3(1.5, 0, 0)).norm() < 1e-15);
  CHECK(r.barycentric.sum() == doctest::Approx(1.0));
  CHECK((r.barycentric[0] * a + r.barycentric[1] * b + r.barycentric[2] * c - r.point).norm() < 1e-15);
  const auto p = closest_point_triangle(Vec3(0, 3, 4), a, a, a);
  CHECK(p.point == a);
}

TEST_CASE("closest point matches dense sampling") {
  Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 a = 0.1 * Vec3(rng.normal(), rng.normal(), rng.normal());
    const Vec3 b = a + 0.1 * Vec3(rng.normal(), rng.normal(), rng.normal());
    const Vec3 c = a + 0.1 * Vec3(rng.normal(), rng.normal(), rng.normal());
    const Vec3 p = 0.2 * Vec3(rng.normal(), rng.normal(), rng.normal());
    const auto proj = closest_point_triangle(p, a, b, c);
    const double exact = (p - proj.point).norm();
    CHECK(proj.barycentric.minCoeff() >= 0.0);
    CHECK(proj.barycentric.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((proj.barycentric[0] * a + proj.barycentric[1] * b + proj.barycentric[2] * c - proj.point).norm() < 1e-14);

    double sampled = std::min({(p - a).norm(), (p - b).norm(), (p - c).norm()});
    for (int s = 0; s < 1000000; ++s) {
      double r1 = rng.uniform(), r2 = rng.uniform();
      if (r1 + r2 > 1) {
        r1 = 1 - r1;
        r2 = 1 - r2;
      }
      sampled = std::min(sampled, (p - (a + r1 * (b - a) + r2 * (c - a))).norm());
    }
    CHECK(sampled >= exact - 1e-12);
    CHECK(sampled - exact <= 1e-4);
  }
}

TEST_CASE("BVH agrees with brute force") {
  SUBCASE("cube") {
    const Mesh cube = build_beam_mesh(1, 1, 1, {1, 1, 1});
    const Bvh bvh(cube.boundary(), cube.nodes(), 2);
    Rng rng(1);
    for (int q = 0; q < 500; ++q) {
      const Vec3 p(rng.uniform(-1, 2), rng.uniform(-1, 2), rng.uniform(-1, 2));
      const auto r = bvh.closest(p);
      const auto o = brute_force_closest(cube.boundary(), cube.nodes(), p);
      CHECK(r.triangle == o.triangle);
      CHECK(r.dist2 == o.dist2);
    }
    // points equidistant from several faces resolve to the lowest index
    const Vec3 center(0.5, 0.5, 0.5);
    CHECK(bvh.closest(center).triangle == brute_force_closest(cube.boundary(), cube.nodes(), center).triangle);
  }
  SUBCASE("single triangle is a single leaf") {
    SurfaceMesh s;
    s.triangles.push_back({0, 1, 2});
    std::vector<Vec3> x = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    const Bvh bvh(s, x);
    CHECK(bvh.nodes().size() == 1);
    CHECK(bvh.nodes()[0].leaf);
  }
  SUBCASE("deformed beam") {
    const Mesh beam = build_beam_mesh(19, 4, 4, {1, 0.2, 0.2});
    Rng rng(77);
    const NodalField u = random_field(beam, rng, 0.01);
    const auto x = deformed_positions(beam, u);
    const Bvh bvh(beam.boundary(), x);
    int mismatches = 0;
    for (int q = 0; q < 1000; ++q) {
      const Vec3 p(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 0.4), rng.uniform(-0.2, 0.4));
      const auto r = bvh.closest(p);
      const auto o = brute_force_closest(beam.boundary(), x, p);
      mismatches += r.triangle != o.triangle || r.dist2 != o.dist2;
    }
    CHECK(mismatches == 0);
  }
  SUBCASE("empty surface") {
    SurfaceMesh s;
    std::vector<Vec3> x;
    CHECK_THROWS_AS(Bvh(s, x), InvalidArgument);
  }
}

TEST_CASE("J on simple configurations") {
  const Mesh beam = build_beam_mesh(6, 2, 2, {1, 0.2, 0.2});
  Rng rng(3);
  const NodalField u = random_field(beam, rng, 0.01);

  const PointCloud on_surface = noisy_surface_cloud(beam, u, 200, 0.0, rng);
  const auto e = evaluate_J(beam, u, on_surface);
  CHECK(e.value < 1e-12);
  CHECK(grad_J(beam, u, on_surface, e).norm() < 1e-12);

  const Mesh slab = build_beam_mesh(1, 1, 1, {10, 10, 1});
  const PointCloud one({Vec3(5, 5, 1.25)});
  CHECK(evaluate_J(slab, NodalField(slab.node_count()), one).value == doctest::Approx(0.25 * 0.25 / 2));

  CHECK_THROWS_AS(evaluate_J(beam, u, PointCloud()), InvalidArgument);
  CHECK_THROWS_AS(PointCloud({Vec3(0, std::nan(""), 0)}), InvalidArgument);
}

TEST_CASE("J matches brute force on random instances") {
  Rng rng(5150);
  const Mesh beam = build_beam_mesh(19, 4, 4, {1, 0.2, 0.2});
  for (int trial = 0; trial < 5; ++trial) {
    const NodalField u = random_field(beam, rng, 0.005);
    const PointCloud cloud = noisy_surface_cloud(beam, u, 300, 0.05, rng);
    const auto e = evaluate_J(beam, u, cloud);
    CHECK(e.value == brute_force_J(beam, u, cloud));
    CHECK(e.value >= 0.0);
  }
}

TEST_CASE("gradient of J") {
  SUBCASE("single point nearest to a vertex") {
    const Mesh tet = Mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, CellType::Tet4, {0, 1, 2, 3});
    const Vec3 y(-0.3, -0.2, -0.4);
    const PointCloud cloud({y});
    const NodalField u(tet.node_count());
    const auto e = evaluate_J(tet, u, cloud);
    const NodalField g = grad_J(tet, u, cloud, e);
    CHECK((g.node(0) - (Vec3::Zero() - y)).norm() < 1e-15);
    for (std::size_t i = 1; i < 4; ++i) CHECK(g.node(i).norm() == 0.0);
  }
  SUBCASE("stale records are rejected") {
    const Mesh a = build_beam_mesh(2, 1, 1, {1, 1, 1});
    const Mesh b = build_beam_mesh(3, 1, 1, {1, 1, 1});
    const PointCloud cloud({Vec3(2, 2, 2)});
    const auto e = evaluate_J(a, NodalField(a.node_count()), cloud);
    CHECK_THROWS_AS(grad_J(b, NodalField(b.node_count()), cloud, e), InvalidArgument);
    const PointCloud two({Vec3(2, 2, 2), Vec3(0, 0, 3)});
    CHECK_THROWS_AS(grad_J(a, NodalField(a.node_count()), two, e), InvalidArgument);
  }
  SUBCASE("finite differences at stable correspondences") {
    const Mesh beam = build_beam_mesh(6, 2, 2, {1, 0.2, 0.2});
    Rng rng(808);
    int checked = 0, excluded = 0;
    while (checked < 30) {
      const NodalField u = random_field(beam, rng, 0.005);
      const PointCloud cloud = noisy_surface_cloud(beam, u, 10, 0.03, rng);
      const NodalField delta = random_field(beam, rng, 1.0);
      const double h = 1e-7;
      const auto e0 = evaluate_J(beam, u, cloud);
      const auto ep = evaluate_J(beam, u + h * delta, cloud);
      const auto em = evaluate_J(beam, u - h * delta, cloud);
      bool stable = true;
      for (std::size_t j = 0; j < cloud.size(); ++j) {
        const auto f0 = closest_feature(beam.boundary(), e0.records[j]);
        stable = stable && f0 == closest_feature(beam.boundary(), ep.records[j]) &&
                 f0 == closest_feature(beam.boundary(), em.records[j]);
      }
      if (!stable) {
        ++excluded;
        continue;
      }
      ++checked;
      const double fd = (ep.value - em.value) / (2 * h);
      const double an = grad_J(beam, u, cloud, e0).vec().dot(delta.vec());
      CHECK(std::abs(fd - an) <= 1e-5 * std::abs(an));
    }
    CHECK(excluded <= 6);
  }
}

TEST_CASE("J and its gradient are translation covariant") {
  const Mesh beam = build_beam_mesh(6, 2, 2, {1, 0.2, 0.2}).with_dirichlet({});
  Rng rng(9);
  const NodalField u = random_field(beam, rng, 0.01, false);
  const PointCloud cloud = noisy_surface_cloud(beam, u, 50, 0.02, rng);
  const Vec3 shift(0.125, -0.25, 0.5);
  NodalField us = u;
  for (std::size_t i = 0; i < beam.node_count(); ++i) us.node(i) += shift;
  std::vector<Vec3> moved;
  for (const auto& p : cloud.points()) moved.push_back(p + shift);
  const PointCloud cs(moved);
  const auto e = evaluate_J(beam, u, cloud);
  const auto es = evaluate_J(beam, us, cs);
  CHECK(std::abs(e.value - es.value) <= 1e-12);
  CHECK((grad_J(beam, u, cloud, e) - grad_J(beam, us, cs, es)).norm() <= 1e-12);
}
