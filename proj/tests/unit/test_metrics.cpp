#include <doctest.h>

#include "../support/oracles.hpp"
#include "hyperreg/errors.hpp"
#include "hyperreg/metrics.hpp"

using namespace hyperreg;
using namespace hyperreg::testing;

TEST_CASE("target registration error") {
  const Mesh beam = build_beam_mesh(6, 2, 2, {1, 0.2, 0.2});
  Rng rng(1);
  const NodalField u = random_field(beam, rng, 0.01);
  const std::vector<std::size_t> markers = {5, 17, 40, 62};
  CHECK(tre(u, u, markers).mean == 0.0);
  CHECK(tre(u, u, markers).max == 0.0);

  NodalField shifted = u;
  const Vec3 delta(0.003, -0.004, 0.0);
  for (auto i : markers) shifted.node(i) += delta;
  CHECK(tre(shifted, u, markers).mean == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(tre(shifted, u, markers).max == doctest::Approx(0.005).epsilon(1e-12));

  const NodalField v = random_field(beam, rng, 0.01);
  double mean = 0, mx = 0;
  for (auto i : markers) {
    const double d = std::sqrt(std::pow(u.vec()[3 * i] - v.vec()[3 * i], 2) + std::pow(u.vec()[3 * i + 1] - v.vec()[3 * i + 1], 2) +
                               std::pow(u.vec()[3 * i + 2] - v.vec()[3 * i + 2], 2));
    mean += d / markers.size();
    mx = std::max(mx, d);
  }
  CHECK(tre(u, v, markers).mean == doctest::Approx(mean).epsilon(1e-14));
  CHECK(tre(u, v, markers).max == doctest::Approx(mx).epsilon(1e-14));

  // adding a rigid offset moves the mean by at most its length
  NodalField w = u;
  for (std::size_t i = 0; i < w.node_count(); ++i) w.node(i) += delta;
  CHECK(tre(w, v, markers).mean <= tre(u, v, markers).mean + delta.norm() + 1e-15);
  CHECK_THROWS_AS(tre(u, v, {}), InvalidArgument);
}

TEST_CASE("force error") {
  NodalField g(4);
  g.node(1) = Vec3(1, 2, 0);
  g.node(3) = Vec3(0, 1, -1);
  auto e = force_error(g, g);
  CHECK(e.nodal_l2_pct == 0.0);
  CHECK(e.net_magnitude_pct == 0.0);
  e = force_error(2.0 * g, g);
  CHECK(e.nodal_l2_pct == doctest::Approx(100.0));
  CHECK(e.net_magnitude_pct == doctest::Approx(100.0));

  NodalField moved(4);
  moved.node(0) = g.node(3);
  moved.node(2) = g.node(1);
  e = force_error(moved, g);
  CHECK(e.net_magnitude_pct == doctest::Approx(0.0));
  CHECK(e.nodal_l2_pct > 0.0);
  CHECK_THROWS_AS(force_error(g, NodalField(4)), InvalidArgument);
}

TEST_CASE("surface error") {
  const Mesh cube = build_beam_mesh(1, 1, 1, {1, 1, 1});
  const NodalField zero(cube.node_count());
  Rng rng(2);
  const PointCloud on = noisy_surface_cloud(cube, zero, 50, 0.0, rng);
  CHECK(surface_error(cube, zero, on).mean < 1e-15);
  CHECK(surface_error(cube, zero, on).rms < 1e-15);
  const PointCloud one({Vec3(0.5, 0.5, 1.3)});
  CHECK(surface_error(cube, zero, one).mean == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(surface_error(cube, zero, one).rms == doctest::Approx(0.3).epsilon(1e-14));

  const Mesh beam = build_beam_mesh(6, 2, 2, {1, 0.2, 0.2});
  for (int k = 0; k < 10; ++k) {
    const NodalField u = random_field(beam, rng, 0.01);
    const PointCloud cloud = noisy_surface_cloud(beam, u, 200, 0.05, rng);
    const auto s = surface_error(beam, u, cloud);
    const double J = evaluate_J(beam, u, cloud).value;
    CHECK(std::abs(s.rms * s.rms - 2 * J) <= 1e-12 * 2 * J);
    CHECK(s.rms >= s.mean);
    CHECK(s.mean >= 0.0);
  }
}

TEST_CASE("run summaries") {
  EvalReport a;
  a.surface = {1.0, 2.0};
  a.iterations = 10;
  a.time_total = 0.5;
  auto s = summarize_runs({a});
  for (const auto& m : s) CHECK(m.std == 0.0);
  CHECK(s[0].name == "surface_mean_m");
  CHECK(s[0].mean == 1.0);

  EvalReport lo = a, hi = a;
  lo.surface.mean = 3.0 - 0.5;
  hi.surface.mean = 3.0 + 0.5;
  s = summarize_runs({lo, hi});
  CHECK(s[0].mean == doctest::Approx(3.0));
  CHECK(s[0].std == doctest::Approx(0.5 * std::sqrt(2.0)));

  s = summarize_runs({a, a, a});
  CHECK(s[10].mean == 10.0);
  CHECK(s[10].std == 0.0);
  CHECK_THROWS_AS(summarize_runs({}), InvalidArgument);

  const std::string csv = reports_csv({a, lo});
  CHECK(csv.substr(0, csv.find('\n')) ==
        "run,surface_mean_m,surface_rms_m,tre_mean_m,tre_max_m,force_l2_pct,force_net_pct,time_forward_s,"
        "time_distance_s,time_backward_s,time_total_s,iterations");
  CHECK(csv.find("\n1,2.5,2,") != std::string::npos);
  CHECK(format_g9(1.0 / 3.0) == "0.333333333");
  CHECK(summary_csv(summarize_runs({a})).rfind("metric,mean,std\nsurface_mean_m,1,0\n", 0) == 0);
  CHECK(is_timing_column("time_total_s"));
  CHECK_FALSE(is_timing_column("iterations"));
}
