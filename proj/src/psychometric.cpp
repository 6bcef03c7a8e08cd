#include "snrdet/psychometric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "snrdet/error.hpp"
#include "snrdet/nelder_mead.hpp"
#include "snrdet/parallel.hpp"
#include "snrdet/rng.hpp"

namespace snrdet {
namespace {

constexpr double kProbClamp = 1e-12;
const double kLogK[2] = {std::log(1e-4), std::log(50.0)};
const double kLogV[2] = {std::log(0.02), std::log(50.0)};

double softplus(double a) { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }

void check_params(const LogisticParams& f) {
  if (!(f.k > 0.0) || !(f.v > 0.0)) throw InvalidArgument("logistic: k and v must be positive");
}

struct Objective {
  std::span<const CurvePoint> points;

  double operator()(const std::vector<double>& theta) const {
    const double lk = std::clamp(theta[1], kLogK[0], kLogK[1]);
    const double lv = std::clamp(theta[2], kLogV[0], kLogV[1]);
    const double penalty = (theta[1] - lk) * (theta[1] - lk) + (theta[2] - lv) * (theta[2] - lv);
    return negative_log_likelihood(points, {theta[0], std::exp(lk), std::exp(lv)}) + 1e3 * penalty;
  }
};

LogisticParams from_theta(const std::vector<double>& theta) {
  return {theta[0], std::exp(std::clamp(theta[1], kLogK[0], kLogK[1])),
          std::exp(std::clamp(theta[2], kLogV[0], kLogV[1]))};
}

void check_identifiable(std::span<const CurvePoint> points) {
  std::set<double> snrs;
  bool some_above_zero = false, some_below_one = false;
  for (const auto& p : points) {
    if (p.trials == 0) continue;
    if (p.successes > p.trials) throw InvalidArgument("fit: successes exceed trials");
    snrs.insert(p.snr);
    if (p.successes > 0) some_above_zero = true;
    if (p.successes < p.trials) some_below_one = true;
  }
  if (snrs.size() < 3) throw InvalidArgument("fit: need at least 3 distinct SNR bins");
  if (!some_above_zero || !some_below_one) throw NumericalError("curve not identifiable (all rates 0 or all 1)");
}

// Polishes a Nelder-Mead optimum by restarting until the NLL stops improving.
FitResult polish(const Objective& obj, std::vector<double> theta, double value) {
  const std::vector<double> step{0.5, 0.1, 0.1};
  for (int round = 0; round < 8; ++round) {
    const auto r = nelder_mead(obj, theta, step);
    const bool improved = r.value < value - 1e-10;
    if (r.value < value) {
      theta = r.x;
      value = r.value;
    }
    if (!improved) break;
  }
  FitResult out;
  out.params = from_theta(theta);
  out.nll = negative_log_likelihood(obj.points, out.params);
  return out;
}

double interpolate_rate(const std::vector<double>& snr, const std::vector<double>& rate, double x) {
  if (x <= snr.front()) return rate.front();
  if (x >= snr.back()) return rate.back();
  const auto it = std::upper_bound(snr.begin(), snr.end(), x);
  const auto i = static_cast<std::size_t>(it - snr.begin()) - 1;
  const double t = (x - snr[i]) / (snr[i + 1] - snr[i]);
  return rate[i] + t * (rate[i + 1] - rate[i]);
}

std::vector<CurvePoint> sorted_points(std::span<const CurvePoint> points) {
  std::vector<CurvePoint> pts;
  for (const auto& p : points) {
    if (p.trials > 0) pts.push_back({p.snr, p.successes, p.trials, {}});
  }
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.snr < b.snr; });
  return pts;
}

}  // namespace

double log_logistic_p(double snr, const LogisticParams& f) {
  check_params(f);
  return -f.v * softplus(-f.k * (snr - f.x0));
}

double logistic_p(double snr, const LogisticParams& f) { return std::exp(log_logistic_p(snr, f)); }

double logistic_slope(double snr, const LogisticParams& f) {
  check_params(f);
  const double z = f.k * (snr - f.x0);
  // v k e^{-z} (1 + e^{-z})^{-v-1} = v k sigmoid(-z) p
  const double sig_neg = 1.0 / (1.0 + std::exp(z));
  return f.v * f.k * sig_neg * logistic_p(snr, f);
}

double logistic_inverse(double p, const LogisticParams& f) {
  check_params(f);
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("logistic_inverse: p must lie in (0, 1)");
  // p^{-1/v} - 1 computed as expm1(-ln(p)/v) to keep precision near p = 1.
  return f.x0 - std::log(std::expm1(-std::log(p) / f.v)) / f.k;
}

double negative_log_likelihood(std::span<const CurvePoint> points, const LogisticParams& fit) {
  const double log_lo = std::log(kProbClamp);
  const double log_hi = std::log1p(-kProbClamp);
  double nll = 0.0;
  for (const auto& p : points) {
    if (p.trials == 0) continue;
    const double lp = std::clamp(log_logistic_p(p.snr, fit), log_lo, log_hi);
    const double l1mp = std::log(-std::expm1(lp));
    nll -= static_cast<double>(p.successes) * lp + static_cast<double>(p.trials - p.successes) * l1mp;
  }
  return nll;
}

FitResult fit_mle(std::span<const CurvePoint> points) {
  check_identifiable(points);
  double center = 0.0;
  try {
    center = empirical_crossing(points, 0.5);
  } catch (const Error&) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : points) {
      if (p.trials) {
        sum += p.snr;
        ++n;
      }
    }
    center = sum / static_cast<double>(n);
  }
  const Objective obj{points};
  const std::vector<double> step{2.0, 0.5, 0.5};
  std::vector<double> best_theta;
  double best = std::numeric_limits<double>::infinity();
  int starts = 0;
  for (double k0 : {0.3, 0.7}) {
    for (double dx : {0.0, -3.0, 3.0}) {
      const auto r = nelder_mead(obj, {center + dx, std::log(k0), 0.0}, step);
      ++starts;
      if (r.value < best) {
        best = r.value;
        best_theta = r.x;
      }
    }
  }
  FitResult out = polish(obj, best_theta, best);
  out.starts = starts;
  return out;
}

FitResult fit_mle_from(std::span<const CurvePoint> points, const LogisticParams& start) {
  check_identifiable(points);
  const Objective obj{points};
  const std::vector<double> theta{start.x0, std::log(start.k), std::log(start.v)};
  const auto r = nelder_mead(obj, theta, {1.0, 0.3, 0.3});
  FitResult out = polish(obj, r.x, r.value);
  out.starts = 1;
  return out;
}

BootstrapCi bootstrap_ci(std::span<const CurvePoint> points, const FitResult& point_fit,
                         const BootstrapOptions& options) {
  if (options.n_boot == 0) throw InvalidArgument("bootstrap: n_boot must be >= 1");
  if (!(options.level > 0.0 && options.level < 1.0)) throw InvalidArgument("bootstrap: level must lie in (0, 1)");
  check_params(point_fit.params);
  std::vector<std::optional<LogisticParams>> fits(options.n_boot);
  parallel_for(options.n_boot, options.threads, [&](std::size_t r) {
    Rng rng(options.seed, {0x626f6f74ull, r});
    std::vector<CurvePoint> sample;
    sample.reserve(points.size());
    for (const auto& p : points) {
      CurvePoint q{p.snr, 0, p.trials, {}};
      for (std::size_t t = 0; t < p.trials; ++t) {
        if (rng.below(p.trials) < p.successes) ++q.successes;
      }
      sample.push_back(std::move(q));
    }
    try {
      fits[r] = fit_mle_from(sample, point_fit.params).params;
    } catch (const Error&) {
      fits[r].reset();
    }
  });
  std::vector<double> x0, k, v, s50;
  BootstrapCi ci;
  ci.n_boot = options.n_boot;
  for (const auto& f : fits) {
    if (!f) {
      ++ci.failures;
      continue;
    }
    x0.push_back(f->x0);
    k.push_back(f->k);
    v.push_back(f->v);
    s50.push_back(logistic_inverse(0.5, *f));
  }
  if (static_cast<double>(ci.failures) > 0.2 * static_cast<double>(options.n_boot)) {
    throw NumericalError("bootstrap: " + std::to_string(ci.failures) + " of " + std::to_string(options.n_boot) +
                         " refits failed (data too close to all-0/all-1 per resample)");
  }
  const double lo = 50.0 * (1.0 - options.level), hi = 100.0 - lo;
  auto interval = [&](const std::vector<double>& xs) { return Interval{percentile(xs, lo), percentile(xs, hi)}; };
  ci.x0 = interval(x0);
  ci.k = interval(k);
  ci.v = interval(v);
  ci.snr_50 = interval(s50);
  return ci;
}

FitMetrics metrics_from_fit(const LogisticParams& fit, double p_lo, double p_hi) {
  check_params(fit);
  if (!(p_lo > 0.0 && p_lo < 1.0) || !(p_hi > 0.0 && p_hi < 1.0)) {
    throw InvalidArgument("metrics: probability levels must lie in (0, 1)");
  }
  FitMetrics m;
  m.source = FitMetrics::Source::Fit;
  m.p_lo = p_lo;
  m.p_hi = p_hi;
  m.snr_50 = logistic_inverse(0.5, fit);
  m.infl_50 = fit.k * fit.v * (std::pow(2.0, 1.0 / fit.v) - 1.0) * std::pow(2.0, -(fit.v + 1.0) / fit.v);
  m.snr_lo = logistic_inverse(p_lo, fit);
  m.snr_hi = logistic_inverse(p_hi, fit);
  return m;
}

std::vector<double> isotonic_rates(std::span<const CurvePoint> points) {
  struct Block {
    double value, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (const auto& p : points) {
    blocks.push_back({p.rate(), static_cast<double>(p.trials), 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
      const Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double w = a.weight + b.weight;
      a.value = w > 0 ? (a.value * a.weight + b.value * b.weight) / w : 0.5 * (a.value + b.value);
      a.weight = w;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

double empirical_crossing(std::span<const CurvePoint> points, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("crossing: p must lie in (0, 1)");
  const auto pts = sorted_points(points);
  if (pts.size() < 2) throw InvalidArgument("crossing: need at least two populated bins");
  const auto rates = isotonic_rates(pts);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (rates[i] <= p && p <= rates[i + 1] && rates[i] < rates[i + 1]) {
      const double t = (p - rates[i]) / (rates[i + 1] - rates[i]);
      return pts[i].snr + t * (pts[i + 1].snr - pts[i].snr);
    }
  }
  std::ostringstream msg;
  msg << "crossing: detection rate never crosses " << p;
  throw NumericalError(msg.str());
}

FitMetrics metrics_empirical(std::span<const CurvePoint> points, double p_lo, double p_hi) {
  FitMetrics m;
  m.source = FitMetrics::Source::Empirical;
  m.p_lo = p_lo;
  m.p_hi = p_hi;
  m.snr_50 = empirical_crossing(points, 0.5);
  const auto pts = sorted_points(points);
  const auto rates = isotonic_rates(pts);
  std::vector<double> snr, spacing;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    snr.push_back(pts[i].snr);
    if (i) spacing.push_back(pts[i].snr - pts[i - 1].snr);
  }
  std::sort(spacing.begin(), spacing.end());
  const double h = spacing[spacing.size() / 2];
  m.infl_50 = (interpolate_rate(snr, rates, m.snr_50 + h) - interpolate_rate(snr, rates, m.snr_50 - h)) / (2.0 * h);
  try {
    m.snr_lo = empirical_crossing(points, p_lo);
  } catch (const NumericalError&) {
  }
  try {
    m.snr_hi = empirical_crossing(points, p_hi);
  } catch (const NumericalError&) {
  }
  return m;
}

PsychometricCurve measure_curve(const Detector& detector, const EvalGrid& grid, const ClipPool& calls,
                                const ClipPool& noises, const MeasureOptions& options) {
  if (grid.bins.empty()) throw InvalidArgument("measure_curve: empty grid");
  std::vector<std::pair<std::size_t, std::size_t>> index;
  PsychometricCurve curve;
  curve.points.resize(grid.bins.size());
  for (std::size_t b = 0; b < grid.bins.size(); ++b) {
    curve.points[b].snr = grid.bins[b].snr;
    curve.points[b].trials = grid.bins[b].trials.size();
    curve.points[b].outcomes.assign(grid.bins[b].trials.size(), 0);
    for (std::size_t i = 0; i < grid.bins[b].trials.size(); ++i) index.emplace_back(b, i);
  }
  parallel_for(index.size(), options.threads, [&](std::size_t j) {
    const auto [b, i] = index[j];
    try {
      const auto mix = materialize_trial(grid, b, i, calls, noises, options.band);
      curve.points[b].outcomes[i] = detector.score(mix.mixture).decision ? 1 : 0;
    } catch (const std::exception& e) {
      const auto& t = grid.bins[b].trials[i];
      std::ostringstream msg;
      msg << "detector failed on bin " << b << " (snr " << grid.bins[b].snr << " dB), trial " << i
          << ", call " << calls.ids.at(t.call_id) << ", noise " << noises.ids.at(t.noise_id) << ": " << e.what();
      throw DataError(msg.str());
    }
  });
  for (auto& p : curve.points) {
    p.successes = 0;
    for (auto o : p.outcomes) p.successes += o;
  }
  return curve;
}

std::string curve_csv(const PsychometricCurve& curve) {
  std::ostringstream out;
  out.precision(12);
  out << "snr,rate,n,successes,x0,k,v\n";
  for (const auto& p : curve.points) {
    out << p.snr << ',' << p.rate() << ',' << p.trials << ',' << p.successes << ',';
    if (curve.fit) {
      out << curve.fit->params.x0 << ',' << curve.fit->params.k << ',' << curve.fit->params.v;
    } else {
      out << ",,";
    }
    out << '\n';
  }
  return out.str();
}

namespace {

nlohmann::json metrics_json(const FitMetrics& m) {
  nlohmann::json j;
  j["source"] = m.source == FitMetrics::Source::Fit ? "fit" : "empirical";
  j["snr_50"] = m.snr_50;
  j["infl_50"] = m.infl_50;
  j["p_lo"] = m.p_lo;
  j["p_hi"] = m.p_hi;
  j["snr_lo"] = m.snr_lo ? nlohmann::json(*m.snr_lo) : nlohmann::json(nullptr);
  j["snr_hi"] = m.snr_hi ? nlohmann::json(*m.snr_hi) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

std::string curve_json(const PsychometricCurve& curve, double p_lo, double p_hi) {
  nlohmann::ordered_json j;
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : curve.points) {
    pts.push_back({{"snr", p.snr}, {"rate", p.rate()}, {"n", p.trials}, {"successes", p.successes}});
  }
  if (curve.fit) {
    j["fit"] = {{"x0", curve.fit->params.x0},
                {"k", curve.fit->params.k},
                {"v", curve.fit->params.v},
                {"nll", curve.fit->nll}};
    j["metrics_fit"] = metrics_json(metrics_from_fit(curve.fit->params, p_lo, p_hi));
  } else {
    j["fit"] = nullptr;
  }
  if (curve.ci) {
    auto iv = [](const Interval& i) { return nlohmann::ordered_json::array({i.lo, i.hi}); };
    j["bootstrap"] = {{"n_boot", curve.ci->n_boot},
                      {"failures", curve.ci->failures},
                      {"x0", iv(curve.ci->x0)},
                      {"k", iv(curve.ci->k)},
                      {"v", iv(curve.ci->v)},
                      {"snr_50", iv(curve.ci->snr_50)}};
  }
  try {
    j["metrics_empirical"] = metrics_json(metrics_empirical(curve.points, p_lo, p_hi));
  } catch (const Error& e) {
    j["metrics_empirical"] = {{"error", e.what()}};
  }
  return j.dump(2) + "\n";
}

PsychometricCurve curve_from_json(const std::string& text) {
  PsychometricCurve curve;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& p : j.at("points")) {
      curve.points.push_back({p.at("snr").get<double>(), p.at("successes").get<std::size_t>(),
                              p.at("n").get<std::size_t>(), {}});
    }
    if (j.contains("fit") && !j["fit"].is_null()) {
      FitResult f;
      f.params = {j["fit"].at("x0").get<double>(), j["fit"].at("k").get<double>(), j["fit"].at("v").get<double>()};
      f.nll = j["fit"].value("nll", 0.0);
      curve.fit = f;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("curve json: ") + e.what());
  }
  return curve;
}

std::vector<CurvePoint> points_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("rates csv: empty input");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(std::remove_if(cell.begin(), cell.end(), [](unsigned char c) { return std::isspace(c); }), cell.end());
      cells.push_back(cell);
    }
    return cells;
  };
  const auto header = split(line);
  auto col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int c_snr = col("snr"), c_n = col("n"), c_s = col("successes"), c_rate = col("rate");
  if (c_snr < 0 || c_n < 0 || (c_s < 0 && c_rate < 0)) {
    throw DataError("rates csv: need columns snr, n and successes or rate");
  }
  std::vector<CurvePoint> pts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    try {
      CurvePoint p;
      p.snr = std::stod(cells.at(static_cast<std::size_t>(c_snr)));
      p.trials = static_cast<std::size_t>(std::stoul(cells.at(static_cast<std::size_t>(c_n))));
      if (c_s >= 0 && static_cast<std::size_t>(c_s) < cells.size() && !cells[static_cast<std::size_t>(c_s)].empty()) {
        p.successes = static_cast<std::size_t>(std::stoul(cells[static_cast<std::size_t>(c_s)]));
      } else {
        const double rate = std::stod(cells.at(static_cast<std::size_t>(c_rate)));
        const double s = rate * static_cast<double>(p.trials);
        if (std::abs(s - std::round(s)) > 1e-6) throw DataError("rate * n is not an integer count");
        p.successes = static_cast<std::size_t>(std::llround(s));
      }
      if (p.successes > p.trials) throw DataError("successes exceed n");
      pts.push_back(p);
    } catch (const DataError& e) {
      throw DataError("rates csv line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception&) {
      throw DataError("rates csv line " + std::to_string(line_no) + ": malformed row");
    }
  }
  return pts;
}

}  // namespace snrdet
