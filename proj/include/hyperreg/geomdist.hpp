#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "hyperreg/mesh.hpp"
#include "hyperreg/nodal_field.hpp"

namespace hyperreg {

/// Target points y_1..y_m (m >= 1, finite coordinates).
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const Vec3& operator[](std::size_t j) const { return points_[j]; }
  const std::vector<Vec3>& points() const noexcept { return points_; }

 private:
  std::vector<Vec3> points_;
};

struct TriangleProjection {
  Vec3 point;
  Vec3 barycentric;  // b >= 0, sum 1, point = b0 a + b1 b + b2 c
};

/// Exact Euclidean projection of p onto the closed triangle (a, b, c).
/// Degenerate triangles (area <= 1e-14) are treated as the union of their edges.
TriangleProjection closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                          const Vec3& c);

struct ClosestPointRecord {
  std::size_t point = 0;
  std::size_t triangle = 0;
  Vec3 barycentric = Vec3::Zero();
  Vec3 closest = Vec3::Zero();
  double dist2 = 0.0;
};

/// Axis-aligned bounding-box tree over the triangles of a surface at given
/// vertex positions. Queries return the same (triangle, squared distance) as a
/// linear scan, ties broken by lowest triangle index.
class Bvh {
 public:
  struct Node {
    Eigen::AlignedBox3d box;
    std::size_t left = 0, right = 0;  // child node ids (internal nodes)
    std::size_t begin = 0, end = 0;   // range into order() (leaves)
    bool leaf = false;
  };

  Bvh(const SurfaceMesh& surface, std::span<const Vec3> positions, std::size_t leaf_size = 4);

  ClosestPointRecord closest(const Vec3& p) const;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t leaf_size() const noexcept { return leaf_size_; }

 private:
  std::size_t build(std::size_t begin, std::size_t end, const std::vector<Vec3>& centroids);
  ClosestPointRecord test_triangle(const Vec3& p, std::size_t t) const;

  std::vector<std::array<std::size_t, 3>> triangles_;
  std::vector<Vec3> positions_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> order_;
  std::size_t leaf_size_;
};

Bvh build_bvh(const SurfaceMesh& surface, std::span<const Vec3> positions,
              std::size_t leaf_size = 4);

struct DistanceEvaluation {
  double value = 0.0;  // J = 1/(2m) sum_j d^2
  std::vector<ClosestPointRecord> records;
  std::size_t triangle_count = 0;
};

/// Data term J(u) against the boundary of the mesh deformed by u.
DistanceEvaluation evaluate_J(const Mesh& mesh, const NodalField& u, const PointCloud& cloud);

/// Frozen-correspondence gradient of J: each record adds (1/m) b_i (x* - y_j) to
/// node i of its triangle. Dirichlet rows are zero.
NodalField grad_J(const Mesh& mesh, const NodalField& u, const PointCloud& cloud,
                  const DistanceEvaluation& eval);

/// Mesh node ids carrying nonzero barycentric weight: identifies the closest
/// vertex, edge or face independently of which triangle reported it.
std::vector<std::size_t> closest_feature(const SurfaceMesh& surface, const ClosestPointRecord& r);

}  // namespace hyperreg
