#include "snrdet/area_model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "snrdet/error.hpp"

namespace snrdet {

double level_at_distance(double source_level_1m, double r_m) {
  if (!(r_m >= 1.0)) throw InvalidArgument("level_at_distance: r must be >= 1 m");
  return source_level_1m - 20.0 * std::log10(r_m);
}

double detection_radius(double p, const AreaModelParams& params) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("detection_radius: p must lie in the open interval (0, 1)");
  const double snr_p = logistic_inverse(p, params.fit);
  const double r = std::pow(10.0, (params.source_level_1m - params.noise_level - snr_p) / 20.0);
  return std::max(r, 0.0);
}

double detection_area(double p, const AreaModelParams& params) {
  const double r = detection_radius(p, params);
  return std::numbers::pi * r * r;
}

double detection_area_factored(double p, const AreaModelParams& params) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("detection_area: p must lie in the open interval (0, 1)");
  const auto& f = params.fit;
  if (!(f.k > 0.0) || !(f.v > 0.0)) throw InvalidArgument("detection_area: k and v must be positive");
  const double log_term = std::log(std::pow(p, -1.0 / f.v) - 1.0) / f.k;
  return std::numbers::pi * std::pow(10.0, params.source_level_1m / 10.0) * std::pow(10.0, -f.x0 / 10.0) *
         std::pow(10.0, -params.noise_level / 10.0) * std::pow(10.0, log_term / 10.0);
}

double dbfs_to_spl(double level_dbfs, double calibration_offset) { return level_dbfs + calibration_offset; }

double calibration_offset_from_sensitivity(double pascal_per_unit) {
  if (!(pascal_per_unit > 0.0)) throw InvalidArgument("calibration: sensitivity must be positive");
  return 20.0 * std::log10(pascal_per_unit / 20e-6);
}

RangeTriple detection_radius_range(double p, const AreaModelParams& params) {
  AreaModelParams lo = params, hi = params;
  lo.source_level_1m -= params.source_level_uncertainty;
  hi.source_level_1m += params.source_level_uncertainty;
  return {detection_radius(p, lo), detection_radius(p, params), detection_radius(p, hi)};
}

RangeTriple detection_area_range(double p, const AreaModelParams& params) {
  const auto r = detection_radius_range(p, params);
  const double pi = std::numbers::pi;
  return {pi * r.low * r.low, pi * r.mid * r.mid, pi * r.high * r.high};
}

std::vector<AreaRow> area_vs_noise_table(double p, const AreaModelParams& params,
                                         const std::vector<double>& noise_levels) {
  if (noise_levels.empty()) throw InvalidArgument("area table: empty noise level list");
  std::vector<AreaRow> rows;
  for (double ln : noise_levels) {
    AreaModelParams q = params;
    q.noise_level = ln;
    const double r = detection_radius(p, q);
    rows.push_back({ln, r, std::numbers::pi * r * r});
  }
  return rows;
}

std::string area_table_csv(const std::vector<AreaRow>& rows) {
  std::ostringstream out;
  out.precision(12);
  out << "noise_level,radius_m,area_m2\n";
  for (const auto& r : rows) out << r.noise_level << ',' << r.radius << ',' << r.area << '\n';
  return out.str();
}

}  // namespace snrdet
