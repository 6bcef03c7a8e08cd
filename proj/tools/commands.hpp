#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace snrdet::cli {

struct GenOptions {
  std::string out;
  std::size_t sessions = 6;
  std::size_t pos = 200;
  std::size_t neg = 800;
  std::uint64_t seed = 1;
  std::string noise_kind = "all";
  double snr_lo = 10.0;
  double snr_hi = 20.0;
  // Augmentation set instead of a base dataset.
  std::string augm_from;  // base dataset manifest
  std::string augm_fit;   // curve JSON with a fit
  std::string augm_mode = "transition";
  std::vector<double> augm_range;  // explicit [lo, hi] overrides the fit
  double augm_fraction = 0.2;
  double augm_width = 10.0;
};

struct TrainOptions {
  std::string manifest;
  std::string augm_manifest;
  std::string out;
  std::string init_weights;
  int epochs = 50;
  double lr = 1e-5;
  int batch = 32;
  double dropout_conv = 0.2;
  double dropout_linear = 0.5;
  std::uint64_t seed = 1;
};

struct PsnrOptions {
  std::string weights;
  std::string detector;  // "cnn" (with --weights) or "energy:<threshold_db>"
  std::string manifest;
  std::string stimuli = "dataset";  // or "analytic"
  std::string split = "test";
  std::string noise_kind = "all";
  std::size_t pool_size = 40;  // analytic stimuli
  double snr_lo = -30.0;
  double snr_hi = 10.0;
  double step = 1.0;
  std::size_t n_per_point = 1000;
  std::size_t n_boot = 1000;
  double p_lo = 0.05;
  double p_hi = 0.95;
  std::uint64_t seed = 1;
  std::string out;
};

struct FitOptions {
  std::string rates;
  std::size_t n_boot = 1000;
  double p_lo = 0.05;
  double p_hi = 0.95;
  std::uint64_t seed = 1;
  std::string out;
};

struct AreaOptions {
  std::string fit;
  std::optional<double> x0, k, v;
  std::vector<double> p{0.9};
  double l1m = 85.0;
  double uncertainty = 2.0;
  double ln = 45.0;
  std::vector<double> ln_range;  // lo hi step
  double calibration_offset = 0.0;
  std::string out;
};

struct ReportOptions {
  std::string manifest;
  std::string split = "test";
  std::vector<std::string> eval;   // name=weights.ptrm
  std::vector<std::string> curve;  // name=curve.json
  std::string out;
};

int run_gen(const GenOptions& o, std::size_t threads, const std::string& resolved_config);
int run_train(const TrainOptions& o, std::size_t threads, const std::string& resolved_config);
int run_psnr(const PsnrOptions& o, std::size_t threads, const std::string& resolved_config);
int run_fit(const FitOptions& o, std::size_t threads, const std::string& resolved_config);
int run_area(const AreaOptions& o, const std::string& resolved_config);
int run_report(const ReportOptions& o, std::size_t threads, const std::string& resolved_config);

}  // namespace snrdet::cli
