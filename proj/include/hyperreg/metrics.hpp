#pragma once

#include <string>
#include <vector>

#include "hyperreg/geomdist.hpp"
#include "hyperreg/mesh.hpp"
#include "hyperreg/nodal_field.hpp"

namespace hyperreg {

struct TreResult {
  double mean = 0.0;  // m
  double max = 0.0;
};

/// Marker displacement mismatch |u_rec,i - u_ref,i| over the markers.
TreResult tre(const NodalField& u_rec, const NodalField& u_ref, const std::vector<std::size_t>& markers);

struct ForceError {
  double nodal_l2_pct = 0.0;
  double net_magnitude_pct = 0.0;
};

ForceError force_error(const NodalField& g_rec, const NodalField& g_ref);

struct SurfaceError {
  double mean = 0.0;  // m
  double rms = 0.0;   // sqrt(2 J)
};

SurfaceError surface_error(const Mesh& mesh, const NodalField& u, const PointCloud& cloud);

struct EvalReport {
  SurfaceError surface;
  TreResult tre;
  ForceError force;
  double time_forward = 0.0;  // s
  double time_distance = 0.0;
  double time_backward = 0.0;
  double time_total = 0.0;
  int iterations = 0;
};

/// Column names of report rows, in CSV order.
const std::vector<std::string>& report_columns();
std::vector<double> report_values(const EvalReport& r);
/// Columns that depend on wall-clock time.
bool is_timing_column(const std::string& name);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single run
};

std::vector<MetricSummary> summarize_runs(const std::vector<EvalReport>& reports);

/// Header row then one row per report, floats with 9 significant digits.
std::string reports_csv(const std::vector<EvalReport>& reports);
/// metric,mean,std rows.
std::string summary_csv(const std::vector<MetricSummary>& summary);

std::string format_g9(double x);

}  // namespace hyperreg
