#include "snrdet/butterworth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "snrdet/error.hpp"

namespace snrdet {
namespace {

using cplx = std::complex<double>;

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain = 1.0;
};

Zpk analog_prototype(int n) {
  Zpk proto;
  for (int k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n);
    proto.poles.push_back(std::polar(1.0, theta));
  }
  return proto;
}

double prewarp(double f, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); }

Zpk bilinear(const Zpk& analog, double fs) {
  const double fs2 = 2.0 * fs;
  Zpk digital;
  cplx num = 1.0, den = 1.0;
  for (const auto& z : analog.zeros) {
    digital.zeros.push_back((fs2 + z) / (fs2 - z));
    num *= fs2 - z;
  }
  for (const auto& p : analog.poles) {
    digital.poles.push_back((fs2 + p) / (fs2 - p));
    den *= fs2 - p;
  }
  while (digital.zeros.size() < digital.poles.size()) digital.zeros.emplace_back(-1.0, 0.0);
  digital.gain = analog.gain * (num / den).real();
  return digital;
}

// Sorts roots into conjugate pairs (positive imaginary part first) followed by real roots.
std::vector<std::pair<cplx, cplx>> pair_roots(std::vector<cplx> roots) {
  constexpr double tol = 1e-10;
  std::vector<std::pair<cplx, cplx>> pairs;
  std::vector<double> reals;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) <= tol * std::max(1.0, std::abs(r))) {
      reals.push_back(r.real());
    } else if (r.imag() > 0) {
      pairs.emplace_back(r, std::conj(r));
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);
  if (reals.size() % 2 == 1) pairs.emplace_back(reals.back(), 0.0);
  return pairs;
}

SosFilter zpk_to_sos(const Zpk& zpk) {
  auto pole_pairs = pair_roots(zpk.poles);
  auto zero_pairs = pair_roots(zpk.zeros);
  if (pole_pairs.size() != zero_pairs.size()) throw InvalidArgument("butterworth: unbalanced zpk");
  std::vector<Biquad> sections;
  for (std::size_t i = 0; i < pole_pairs.size(); ++i) {
    const auto [z1, z2] = zero_pairs[i];
    const auto [p1, p2] = pole_pairs[i];
    Biquad s;
    s.b0 = 1.0;
    s.b1 = -(z1 + z2).real();
    s.b2 = (z1 * z2).real();
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    sections.push_back(s);
  }
  sections.front().b0 *= zpk.gain;
  sections.front().b1 *= zpk.gain;
  sections.front().b2 *= zpk.gain;
  return SosFilter(std::move(sections));
}

void check_rate(double f, double fs, const char* what) {
  if (!(fs > 0) || !(f > 0) || !(f < fs / 2)) {
    throw InvalidArgument(std::string("butterworth: ") + what + " must lie in (0, fs/2)");
  }
}

}  // namespace

SosFilter SosFilter::butterworth_lowpass(int order, double cutoff_hz, double sample_rate) {
  check_rate(cutoff_hz, sample_rate, "cutoff");
  if (order < 1) throw InvalidArgument("butterworth: order must be >= 1");
  const double wc = prewarp(cutoff_hz, sample_rate);
  Zpk analog = analog_prototype(order);
  for (auto& p : analog.poles) p *= wc;
  analog.gain = std::pow(wc, order);
  return zpk_to_sos(bilinear(analog, sample_rate));
}

SosFilter SosFilter::butterworth_highpass(int order, double cutoff_hz, double sample_rate) {
  check_rate(cutoff_hz, sample_rate, "cutoff");
  if (order < 1) throw InvalidArgument("butterworth: order must be >= 1");
  const double wc = prewarp(cutoff_hz, sample_rate);
  Zpk analog = analog_prototype(order);
  cplx prod = 1.0;
  for (auto& p : analog.poles) {
    prod *= -p;
    p = wc / p;
  }
  analog.zeros.assign(order, cplx(0.0, 0.0));
  analog.gain = (1.0 / prod).real();
  return zpk_to_sos(bilinear(analog, sample_rate));
}

SosFilter SosFilter::butterworth_bandpass(int order, double lo_hz, double hi_hz, double sample_rate) {
  check_rate(lo_hz, sample_rate, "lower edge");
  check_rate(hi_hz, sample_rate, "upper edge");
  if (!(lo_hz < hi_hz)) throw InvalidArgument("butterworth: lower edge must be below upper edge");
  if (order < 2 || order % 2 != 0) throw InvalidArgument("butterworth: bandpass order must be even");
  const int proto_order = order / 2;
  const double w_lo = prewarp(lo_hz, sample_rate);
  const double w_hi = prewarp(hi_hz, sample_rate);
  const double bw = w_hi - w_lo;
  const double w0 = std::sqrt(w_lo * w_hi);
  const Zpk proto = analog_prototype(proto_order);
  Zpk analog;
  for (const auto& p : proto.poles) {
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0 * w0);
    analog.poles.push_back(half + root);
    analog.poles.push_back(half - root);
  }
  analog.zeros.assign(proto_order, cplx(0.0, 0.0));
  analog.gain = std::pow(bw, proto_order);
  return zpk_to_sos(bilinear(analog, sample_rate));
}

int SosFilter::order() const {
  int n = 0;
  for (const auto& s : sections_) n += (s.a2 != 0.0) ? 2 : 1;
  return n;
}

double SosFilter::magnitude(double freq_hz, double sample_rate) const {
  const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

std::vector<double> SosFilter::filter(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections_) {
    double z1 = 0, z2 = 0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> SosFilter::filter(std::span<const double> x, double zi_scale) const {
  std::vector<double> y(x.begin(), x.end());
  double scale = zi_scale;
  for (const auto& s : sections_) {
    // Steady state of a transposed direct form II section under a constant input `scale`.
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z1 = scale * (dc - s.b0);
    double z2 = scale * (s.b2 - s.a2 * dc);
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    scale *= dc;
  }
  return y;
}

std::vector<double> SosFilter::filtfilt(std::span<const double> x, std::size_t pad) const {
  const std::size_t n = x.size();
  if (n == 0) return {};
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  auto fwd = filter(ext, ext.front());
  std::reverse(fwd.begin(), fwd.end());
  auto back = filter(fwd, fwd.front());
  std::reverse(back.begin(), back.end());
  return {back.begin() + static_cast<std::ptrdiff_t>(pad),
          back.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace snrdet
