#include "hyperreg/geomdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hyperreg/errors.hpp"

namespace hyperreg {

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {
  for (const auto& p : points_)
    if (!p.allFinite()) throw InvalidArgument("point cloud contains a non-finite coordinate");
}

namespace {

TriangleProjection closest_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return {a + t * ab, Vec3(1.0 - t, t, 0.0)};
}

}  // namespace

TriangleProjection closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                          const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a;
  if (0.5 * ab.cross(ac).norm() <= 1e-14) {
    const TriangleProjection e0 = closest_on_segment(p, a, b);
    TriangleProjection e1 = closest_on_segment(p, b, c);
    TriangleProjection e2 = closest_on_segment(p, c, a);
    e1.barycentric = Vec3(0.0, e1.barycentric[0], e1.barycentric[1]);
    e2.barycentric = Vec3(e2.barycentric[1], 0.0, e2.barycentric[0]);
    const TriangleProjection* best = &e0;
    for (const TriangleProjection* e : {&e1, &e2})
      if ((p - e->point).squaredNorm() < (p - best->point).squaredNorm()) best = e;
    return *best;
  }

  // Voronoi-region classification (vertex, edge, face).
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {a, Vec3(1, 0, 0)};

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {b, Vec3(0, 1, 0)};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, Vec3(1 - v, v, 0)};
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {c, Vec3(0, 0, 1)};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, Vec3(1 - w, 0, w)};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), Vec3(0, 1 - w, w)};
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {a + ab * v + ac * w, Vec3(1.0 - v - w, v, w)};
}

Bvh::Bvh(const SurfaceMesh& surface, std::span<const Vec3> positions, std::size_t leaf_size)
    : triangles_(surface.triangles), positions_(positions.begin(), positions.end()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  if (surface.triangles.empty()) throw InvalidArgument("cannot build a BVH over an empty surface");
  for (const auto& x : positions_)
    if (!x.allFinite()) throw InvalidArgument("non-finite vertex position");
  std::vector<Vec3> centroids(surface.triangles.size());
  for (std::size_t t = 0; t < centroids.size(); ++t) {
    const auto& tri = surface.triangles[t];
    centroids[t] = (positions_[tri[0]] + positions_[tri[1]] + positions_[tri[2]]) / 3.0;
  }
  order_.resize(centroids.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(2 * centroids.size() / leaf_size_ + 1);
  build(0, order_.size(), centroids);
}

std::size_t Bvh::build(std::size_t begin, std::size_t end, const std::vector<Vec3>& centroids) {
  const std::size_t id = nodes_.size();
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d cbox;
  for (std::size_t k = begin; k < end; ++k) {
    const auto& tri = triangles_[order_[k]];
    for (std::size_t v : tri) box.extend(positions_[v]);
    cbox.extend(centroids[order_[k]]);
  }
  nodes_[id].box = box;
  if (end - begin <= leaf_size_) {
    nodes_[id].leaf = true;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis;
  cbox.sizes().maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     if (centroids[a][axis] != centroids[b][axis])
                       return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const std::size_t left = build(begin, mid, centroids);
  const std::size_t right = build(mid, end, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestPointRecord Bvh::test_triangle(const Vec3& p, std::size_t t) const {
  const auto& tri = triangles_[t];
  const TriangleProjection proj =
      closest_point_triangle(p, positions_[tri[0]], positions_[tri[1]], positions_[tri[2]]);
  ClosestPointRecord r;
  r.triangle = t;
  r.barycentric = proj.barycentric;
  r.closest = proj.point;
  r.dist2 = (p - proj.point).squaredNorm();
  return r;
}

ClosestPointRecord Bvh::closest(const Vec3& p) const {
  ClosestPointRecord best;
  best.dist2 = std::numeric_limits<double>::infinity();
  best.triangle = std::numeric_limits<std::size_t>::max();
  // Boxes are pruned with a small relative slack so rounding in the box distance
  // can never hide a tied or closer triangle.
  auto prunable = [&](double box_d2) { return box_d2 > best.dist2 * (1.0 + 1e-10) + 1e-300; };

  std::size_t stack[128];
  std::size_t top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (prunable(n.box.squaredExteriorDistance(p))) continue;
    if (n.leaf) {
      for (std::size_t k = n.begin; k < n.end; ++k) {
        const ClosestPointRecord r = test_triangle(p, order_[k]);
        if (r.dist2 < best.dist2 || (r.dist2 == best.dist2 && r.triangle < best.triangle)) best = r;
      }
      continue;
    }
    const double dl = nodes_[n.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[n.right].box.squaredExteriorDistance(p);
    // push the farther child first so the nearer one is visited next
    if (dl <= dr) {
      stack[top++] = n.right;
      stack[top++] = n.left;
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
  return best;
}

Bvh build_bvh(const SurfaceMesh& surface, std::span<const Vec3> positions, std::size_t leaf_size) {
  return Bvh(surface, positions, leaf_size);
}

DistanceEvaluation evaluate_J(const Mesh& mesh, const NodalField& u, const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidArgument("point cloud is empty");
  const std::vector<Vec3> x = deformed_positions(mesh, u);
  const Bvh bvh(mesh.boundary(), x);
  DistanceEvaluation out;
  out.triangle_count = mesh.boundary().triangles.size();
  out.records.resize(cloud.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    out.records[j] = bvh.closest(cloud[j]);
    out.records[j].point = j;
  }
  for (const auto& r : out.records) sum += r.dist2;
  out.value = sum / (2.0 * static_cast<double>(cloud.size()));
  return out;
}

NodalField grad_J(const Mesh& mesh, const NodalField& u, const PointCloud& cloud,
                  const DistanceEvaluation& eval) {
  const SurfaceMesh& surface = mesh.boundary();
  if (eval.triangle_count != surface.triangles.size() || eval.records.size() != cloud.size())
    throw InvalidArgument("distance records do not match this surface and cloud");
  if (u.node_count() != mesh.node_count())
    throw InvalidArgument("displacement length does not match mesh");
  NodalField g(mesh.node_count());
  const double inv_m = 1.0 / static_cast<double>(cloud.size());
  for (const auto& r : eval.records) {
    if (r.triangle >= surface.triangles.size() || r.point >= cloud.size())
      throw InvalidArgument("stale distance record");
    const Vec3 diff = inv_m * (r.closest - cloud[r.point]);
    const auto& tri = surface.triangles[r.triangle];
    for (int k = 0; k < 3; ++k) g.node(tri[k]) += r.barycentric[k] * diff;
  }
  for (std::size_t i : mesh.dirichlet_nodes()) g.node(i).setZero();
  return g;
}

std::vector<std::size_t> closest_feature(const SurfaceMesh& surface, const ClosestPointRecord& r) {
  std::vector<std::size_t> f;
  const auto& tri = surface.triangles.at(r.triangle);
  for (int k = 0; k < 3; ++k)
    if (r.barycentric[k] > 0.0) f.push_back(tri[k]);
  std::sort(f.begin(), f.end());
  return f;
}

}  // namespace hyperreg
