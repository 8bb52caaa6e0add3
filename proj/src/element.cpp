#include "hyperreg/element.hpp"

#include <cmath>

namespace hyperreg {
namespace {

ReferenceRule make_hex_rule() {
  static constexpr int corner[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                       {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
  ReferenceRule r;
  r.points = 8;
  r.nodes = 8;
  const double g = 1.0 / std::sqrt(3.0);
  for (std::size_t q = 0; q < 8; ++q) {
    const double xi[3] = {corner[q][0] * g, corner[q][1] * g, corner[q][2] * g};
    r.weights[q] = 1.0;
    Eigen::Matrix<double, 8, 3> d = Eigen::Matrix<double, 8, 3>::Zero();
    for (int a = 0; a < 8; ++a) {
      const double f[3] = {1.0 + corner[a][0] * xi[0], 1.0 + corner[a][1] * xi[1],
                           1.0 + corner[a][2] * xi[2]};
      d(a, 0) = 0.125 * corner[a][0] * f[1] * f[2];
      d(a, 1) = 0.125 * corner[a][1] * f[0] * f[2];
      d(a, 2) = 0.125 * corner[a][2] * f[0] * f[1];
    }
    r.grads[q] = d;
  }
  return r;
}

ReferenceRule make_tet_rule() {
  ReferenceRule r;
  r.points = 1;
  r.nodes = 4;
  r.weights[0] = 1.0 / 6.0;
  Eigen::Matrix<double, 8, 3> d = Eigen::Matrix<double, 8, 3>::Zero();
  d.row(0) << -1, -1, -1;
  d.row(1) << 1, 0, 0;
  d.row(2) << 0, 1, 0;
  d.row(3) << 0, 0, 1;
  r.grads[0] = d;
  return r;
}

}  // namespace

const ReferenceRule& reference_rule(CellType t) {
  static const ReferenceRule hex = make_hex_rule();
  static const ReferenceRule tet = make_tet_rule();
  return t == CellType::Hex8 ? hex : tet;
}

const LocalFaces& local_faces(CellType t) {
  static const LocalFaces hex{6, 4,
                              {{{0, 3, 2, 1},
                                {4, 5, 6, 7},
                                {0, 1, 5, 4},
                                {1, 2, 6, 5},
                                {2, 3, 7, 6},
                                {3, 0, 4, 7}}}};
  static const LocalFaces tet{4, 3,
                              {{{0, 2, 1, 0},
                                {0, 1, 3, 0},
                                {1, 2, 3, 0},
                                {0, 3, 2, 0},
                                {0, 0, 0, 0},
                                {0, 0, 0, 0}}}};
  return t == CellType::Hex8 ? hex : tet;
}

}  // namespace hyperreg
