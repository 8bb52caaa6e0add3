#include "hyperreg/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "hyperreg/errors.hpp"

namespace hyperreg {

TreResult tre(const NodalField& u_rec, const NodalField& u_ref, const std::vector<std::size_t>& markers) {
  if (markers.empty()) throw InvalidArgument("tre: no markers");
  if (u_rec.node_count() != u_ref.node_count()) throw InvalidArgument("tre: field sizes differ");
  TreResult r;
  for (auto i : markers) {
    if (i >= u_rec.node_count()) throw InvalidArgument("tre: marker out of range");
    const double d = (u_rec.node(i) - u_ref.node(i)).norm();
    r.mean += d;
    r.max = std::max(r.max, d);
  }
  r.mean /= static_cast<double>(markers.size());
  return r;
}

ForceError force_error(const NodalField& g_rec, const NodalField& g_ref) {
  if (g_rec.node_count() != g_ref.node_count()) throw InvalidArgument("force_error: field sizes differ");
  const double ref = g_ref.norm();
  Vec3 net_rec = Vec3::Zero(), net_ref = Vec3::Zero();
  for (std::size_t i = 0; i < g_ref.node_count(); ++i) {
    net_rec += g_rec.node(i);
    net_ref += g_ref.node(i);
  }
  if (!(ref > 0.0) || !(net_ref.norm() > 0.0)) throw InvalidArgument("force_error: zero reference force");
  return {100.0 * (g_rec - g_ref).norm() / ref, 100.0 * std::abs(net_rec.norm() - net_ref.norm()) / net_ref.norm()};
}

SurfaceError surface_error(const Mesh& mesh, const NodalField& u, const PointCloud& cloud) {
  const auto e = evaluate_J(mesh, u, cloud);
  SurfaceError s;
  for (const auto& r : e.records) s.mean += std::sqrt(r.dist2);
  s.mean /= static_cast<double>(cloud.size());
  s.rms = std::sqrt(2.0 * e.value);
  return s;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "surface_mean_m", "surface_rms_m", "tre_mean_m", "tre_max_m", "force_l2_pct", "force_net_pct",
      "time_forward_s", "time_distance_s", "time_backward_s", "time_total_s", "iterations"};
  return cols;
}

std::vector<double> report_values(const EvalReport& r) {
  return {r.surface.mean, r.surface.rms,   r.tre.mean,    r.tre.max,        r.force.nodal_l2_pct,
          r.force.net_magnitude_pct, r.time_forward, r.time_distance, r.time_backward, r.time_total,
          static_cast<double>(r.iterations)};
}

bool is_timing_column(const std::string& name) { return name.rfind("time_", 0) == 0; }

std::vector<MetricSummary> summarize_runs(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidArgument("summarize_runs: no reports");
  const auto& cols = report_columns();
  std::vector<MetricSummary> out(cols.size());
  const double n = static_cast<double>(reports.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out[c].name = cols[c];
    double sum = 0.0;
    for (const auto& r : reports) sum += report_values(r)[c];
    out[c].mean = sum / n;
    double ss = 0.0;
    for (const auto& r : reports) ss += std::pow(report_values(r)[c] - out[c].mean, 2);
    out[c].std = reports.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return out;
}

std::string format_g9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string reports_csv(const std::vector<EvalReport>& reports) {
  std::string s = "run";
  for (const auto& c : report_columns()) s += "," + c;
  s += "\n";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    s += std::to_string(k);
    for (double v : report_values(reports[k])) s += "," + format_g9(v);
    s += "\n";
  }
  return s;
}

std::string summary_csv(const std::vector<MetricSummary>& summary) {
  std::string s = "metric,mean,std\n";
  for (const auto& m : summary) s += m.name + "," + format_g9(m.mean) + "," + format_g9(m.std) + "\n";
  return s;
}

}  // namespace hyperreg
