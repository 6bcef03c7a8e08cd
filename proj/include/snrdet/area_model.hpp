#pragma once

#include <string>
#include <vector>

#include "snrdet/psychometric.hpp"

namespace snrdet {

/// Inputs of the free-field detection-range model. Levels share one dB scale; only
/// their differences enter the prediction.
struct AreaModelParams {
  double source_level_1m = 85.0;        // dB at 1 m
  double source_level_uncertainty = 2.0;  // +- dB
  double noise_level = 45.0;            // dB at the recorder
  double calibration_offset = 0.0;      // dB added to recorder digital levels to obtain SPL
  LogisticParams fit;
};

/// Spherical spreading: L(r) = L(1 m) - 20 log10(r), r >= 1 m.
double level_at_distance(double source_level_1m, double r_m);

/// Distance at which the call reaches the SNR giving detection probability p.
double detection_radius(double p, const AreaModelParams& params);

/// pi r^2.
double detection_area(double p, const AreaModelParams& params);

/// Same quantity written as the product of powers of ten (independent algebraic route).
double detection_area_factored(double p, const AreaModelParams& params);

/// Converts a recorder level in dBFS to SPL with the configured offset.
double dbfs_to_spl(double level_dbfs, double calibration_offset);

/// Calibration offset for a recorder whose digital unit amplitude corresponds to
/// `pascal_per_unit` (reference 20 uPa).
double calibration_offset_from_sensitivity(double pascal_per_unit);

struct RangeTriple {
  double low, mid, high;  // source level -u, nominal, +u
};

RangeTriple detection_radius_range(double p, const AreaModelParams& params);
RangeTriple detection_area_range(double p, const AreaModelParams& params);

struct AreaRow {
  double noise_level;
  double radius;
  double area;
};

/// One row per noise level, in input order.
std::vector<AreaRow> area_vs_noise_table(double p, const AreaModelParams& params,
                                         const std::vector<double>& noise_levels);

/// CSV: noise_level,radius_m,area_m2
std::string area_table_csv(const std::vector<AreaRow>& rows);

}  // namespace snrdet
