#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snrdet/detector.hpp"
#include "snrdet/mixer.hpp"

namespace snrdet {

/// Parameters of p(snr) = (1 + exp(-k (snr - x0)))^(-v).
struct LogisticParams {
  double x0 = 0.0;  // dB
  double k = 1.0;   // per dB
  double v = 1.0;
};

double logistic_p(double snr, const LogisticParams& fit);
/// ln p(snr), accurate far into the lower tail.
double log_logistic_p(double snr, const LogisticParams& fit);
/// dp/dsnr.
double logistic_slope(double snr, const LogisticParams& fit);
/// SNR at which the curve reaches probability p (closed-form inverse); p in (0, 1).
double logistic_inverse(double p, const LogisticParams& fit);

struct CurvePoint {
  double snr = 0.0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  std::vector<std::uint8_t> outcomes;  // per-trial decisions when measured, else empty

  double rate() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
};

struct FitResult {
  LogisticParams params;
  double nll = 0.0;
  int starts = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct BootstrapCi {
  Interval x0, k, v, snr_50;
  std::size_t n_boot = 0;
  std::size_t failures = 0;
};

struct FitMetrics {
  enum class Source { Fit, Empirical };
  double snr_50 = 0.0;
  double infl_50 = 0.0;
  double p_lo = 0.05;
  double p_hi = 0.95;
  std::optional<double> snr_lo;
  std::optional<double> snr_hi;
  Source source = Source::Fit;
};

struct PsychometricCurve {
  std::vector<CurvePoint> points;
  std::optional<FitResult> fit;
  std::optional<BootstrapCi> ci;
};

/// Bernoulli negative log-likelihood with p clamped to [1e-12, 1 - 1e-12].
double negative_log_likelihood(std::span<const CurvePoint> points, const LogisticParams& fit);

/// Maximum-likelihood fit over (x0, ln k, ln v) by multi-start Nelder-Mead.
/// Throws NumericalError("curve not identifiable") for all-0 or all-1 data.
FitResult fit_mle(std::span<const CurvePoint> points);

/// Refit seeded only from `start` (used for bootstrap replicates).
FitResult fit_mle_from(std::span<const CurvePoint> points, const LogisticParams& start);

struct BootstrapOptions {
  std::size_t n_boot = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double level = 0.95;
};

/// Nonparametric bootstrap: each bin's trials are resampled with replacement, the curve is
/// refit, and percentile intervals are reported. Replicate r depends only on (seed, r).
BootstrapCi bootstrap_ci(std::span<const CurvePoint> points, const FitResult& point_fit,
                         const BootstrapOptions& options = {});

FitMetrics metrics_from_fit(const LogisticParams& fit, double p_lo = 0.05, double p_hi = 0.95);

/// Pool-adjacent-violators smoothing (non-decreasing), weighted by trial counts.
std::vector<double> isotonic_rates(std::span<const CurvePoint> points);

/// SNR where the smoothed rates first cross `p`; throws if the level is never crossed.
double empirical_crossing(std::span<const CurvePoint> points, double p);

/// Crossings by linear interpolation of isotonic rates. snr_50 is required; interval ends are
/// absent when the level is not crossed.
FitMetrics metrics_empirical(std::span<const CurvePoint> points, double p_lo = 0.05, double p_hi = 0.95);

struct MeasureOptions {
  std::size_t threads = 1;
  Band band{};
};

/// Runs the detector on every grid mixture and counts positive decisions per bin.
PsychometricCurve measure_curve(const Detector& detector, const EvalGrid& grid, const ClipPool& calls,
                                const ClipPool& noises, const MeasureOptions& options = {});

/// CSV: snr,rate,n,successes,x0,k,v (fit columns repeated on every row, empty if unfitted).
std::string curve_csv(const PsychometricCurve& curve);
/// JSON with points, fit, bootstrap CIs and both metric variants.
std::string curve_json(const PsychometricCurve& curve, double p_lo = 0.05, double p_hi = 0.95);
/// Reads the points (and fit, when present) back from curve_json output.
PsychometricCurve curve_from_json(const std::string& text);
/// Reads points from a CSV with columns snr and either successes+n or rate+n.
std::vector<CurvePoint> points_from_csv(const std::string& text);

}  // namespace snrdet
