#pragma once

#include <span>
#include <vector>

namespace snrdet {

/// One second-order section, normalized so a0 = 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

/// Cascade of biquads. Designs are digital Butterworth filters obtained from the
/// analog prototype with a prewarped bilinear transform.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  /// `order` counts poles of the resulting filter; bandpass orders must be even.
  static SosFilter butterworth_lowpass(int order, double cutoff_hz, double sample_rate);
  static SosFilter butterworth_highpass(int order, double cutoff_hz, double sample_rate);
  static SosFilter butterworth_bandpass(int order, double lo_hz, double hi_hz, double sample_rate);

  const std::vector<Biquad>& sections() const { return sections_; }
  int order() const;

  /// |H(e^{j 2 pi f / fs})| of a single pass.
  double magnitude(double freq_hz, double sample_rate) const;

  /// Causal filtering, zero initial state unless `zi_scale` is given (steady state for a
  /// constant input of that value).
  std::vector<double> filter(std::span<const double> x) const;
  std::vector<double> filter(std::span<const double> x, double zi_scale) const;

  /// Forward-backward (zero phase) filtering with odd extension of `pad` samples at each
  /// end and steady-state initial conditions. Magnitude response is |H|^2.
  std::vector<double> filtfilt(std::span<const double> x, std::size_t pad) const;

 private:
  std::vector<Biquad> sections_;
};

}  // namespace snrdet
