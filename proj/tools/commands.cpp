#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "snrdet/area_model.hpp"
#include "snrdet/detector.hpp"
#include "snrdet/error.hpp"
#include "snrdet/manifest.hpp"
#include "snrdet/metrics.hpp"
#include "snrdet/mixer.hpp"
#include "snrdet/parallel.hpp"
#include "snrdet/psychometric.hpp"
#include "snrdet/rng.hpp"
#include "snrdet/svg_plot.hpp"
#include "snrdet/synth.hpp"
#include "snrdet/training.hpp"
#include "snrdet/weights_io.hpp"

namespace snrdet::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw InvalidArgument("--out is required");
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + out);
  return dir;
}

void write_config(const fs::path& dir, const std::string& name, const std::string& config) {
  write_text_atomic(dir / name, config);
}

std::optional<NoiseKind> kind_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  return noise_kind_from_string(s);
}

std::string spec_noise_kind(const std::string& spec_json) {
  try {
    const auto j = json::parse(spec_json);
    if (j.contains("noise")) return j["noise"].at("kind").get<std::string>();
  } catch (const json::exception&) {
  }
  return "";
}

std::optional<CallSpec> spec_call(const std::string& spec_json) {
  try {
    const auto j = json::parse(spec_json);
    if (j.contains("call")) return call_spec_from_json(j["call"].dump());
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest spec: ") + e.what());
  }
  return std::nullopt;
}

/// Clean calls (regenerated from their specs) and pure-noise clips of one split.
struct Pools {
  std::vector<AudioClip> calls, noises;
  std::vector<std::string> call_ids, noise_ids;
};

Pools pools_from_manifest(const fs::path& manifest, const std::string& split,
                          const std::optional<NoiseKind>& kind) {
  Pools p;
  for (const auto& row : read_manifest(manifest)) {
    if (row.split != split) continue;
    if (row.label == 1) {
      const auto call = spec_call(row.spec);
      if (!call) throw DataError("manifest row " + row.path + ": positive without a call spec");
      p.calls.push_back(gen_call(*call));
      p.call_ids.push_back(row.path);
    } else {
      if (kind && spec_noise_kind(row.spec) != to_string(*kind)) continue;
      p.noises.push_back(load_row_clip(manifest, row));
      p.noise_ids.push_back(row.path);
    }
  }
  if (p.calls.empty()) throw DataError("no positive rows in split '" + split + "'");
  if (p.noises.empty()) throw DataError("no matching noise rows in split '" + split + "'");
  return p;
}

std::vector<TrainingExample> load_examples(const fs::path& manifest, const std::vector<ManifestRow>& rows,
                                           std::size_t threads) {
  std::vector<TrainingExample> out(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    out[i] = {preprocess(load_row_clip(manifest, rows[i])), rows[i].label};
  });
  return out;
}

std::unique_ptr<Detector> make_detector(const PsnrOptions& o) {
  if (o.detector.rfind("energy:", 0) == 0) {
    try {
      return energy_detector(std::stod(o.detector.substr(7)));
    } catch (const std::logic_error&) {
      throw InvalidArgument("--detector energy:<threshold_db> expects a number");
    }
  }
  if (o.detector.empty() || o.detector == "cnn") {
    if (o.weights.empty()) throw InvalidArgument("--weights is required for the cnn detector");
    return std::make_unique<CnnDetector>(load_weights_file(o.weights));
  }
  throw InvalidArgument("unknown detector '" + o.detector + "'");
}

std::string curve_svg(const PsychometricCurve& curve, const std::string& title) {
  PlotSpec plot;
  plot.title = title;
  plot.x_label = "SNR (dB)";
  plot.y_label = "detection probability";
  plot.y_range = std::pair{0.0, 1.0};
  PlotSeries rates{"measured", {}, {}, false, true, "#1f77b4"};
  for (const auto& p : curve.points) {
    rates.x.push_back(p.snr);
    rates.y.push_back(p.rate());
  }
  plot.series.push_back(rates);
  if (curve.fit && !curve.points.empty()) {
    PlotSeries fit{"fit", {}, {}, true, false, "#d62728"};
    const double lo = curve.points.front().snr, hi = curve.points.back().snr;
    for (int i = 0; i <= 200; ++i) {
      const double x = lo + (hi - lo) * i / 200.0;
      fit.x.push_back(x);
      fit.y.push_back(logistic_p(x, curve.fit->params));
    }
    plot.series.push_back(fit);
  }
  return render_svg(plot);
}

/// Fits and bootstraps a curve in place. Returns false (after logging) if the fit failed.
bool fit_curve(PsychometricCurve& curve, std::size_t n_boot, std::uint64_t seed, std::size_t threads) {
  try {
    curve.fit = fit_mle(curve.points);
  } catch (const NumericalError& e) {
    std::cerr << "snrdet: warning: " << e.what() << "\n";
    return false;
  }
  if (n_boot > 0) {
    BootstrapOptions bo;
    bo.n_boot = n_boot;
    bo.seed = seed;
    bo.threads = threads;
    curve.ci = bootstrap_ci(curve.points, *curve.fit, bo);
  }
  return true;
}

std::pair<std::string, std::string> split_named(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("expected name=path, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

std::string fmt(double v, int digits = 2) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt(const std::optional<double>& v, int digits = 3) { return v ? fmt(*v, digits) : "n/a"; }

int gen_augm(const GenOptions& o, const fs::path& dir) {
  const fs::path base(o.augm_from);
  std::vector<AudioClip> calls, noises;
  std::vector<const ManifestRow*> call_rows;
  std::vector<CallSpec> call_specs;
  const auto rows = read_manifest(base);
  for (const auto& row : rows) {
    if (row.split != "train") continue;
    if (row.label == 1) {
      const auto call = spec_call(row.spec);
      if (!call) throw DataError("manifest row " + row.path + ": positive without a call spec");
      calls.push_back(gen_call(*call));
      call_rows.push_back(&row);
      call_specs.push_back(*call);
    } else {
      noises.push_back(load_row_clip(base, row));
    }
  }
  double lo = 0.0, hi = 0.0;
  if (!o.augm_range.empty()) {
    if (o.augm_range.size() != 2) throw InvalidArgument("--augm-range expects two values");
    lo = o.augm_range[0];
    hi = o.augm_range[1];
  } else {
    if (o.augm_fit.empty()) throw InvalidArgument("--augm-fit or --augm-range is required with --augm-from");
    const auto curve = curve_from_json(read_text(o.augm_fit));
    if (!curve.fit) throw DataError("curve file has no fit: " + o.augm_fit);
    std::tie(lo, hi) = select_augm_range_from_curve(curve.fit->params, augm_mode_from_string(o.augm_mode),
                                                    o.augm_width);
  }
  const auto augm = build_train_augm(calls, noises, o.augm_fraction, lo, hi, o.seed);
  fs::create_directories(dir / "wav");
  std::vector<ManifestRow> out;
  for (std::size_t i = 0; i < augm.size(); ++i) {
    const auto& a = augm[i];
    char name[32];
    std::snprintf(name, sizeof name, "augm_%06zu.wav", i);
    const fs::path rel = fs::path("wav") / name;
    write_wav(dir / rel, a.clip);
    const json spec{{"augm",
                     {{"call", json::parse(call_spec_json(call_specs[a.call_index]))},
                      {"noise_index", a.noise_index},
                      {"target_snr", a.target_snr},
                      {"gain_db", a.gain_db},
                      {"range", {lo, hi}}}}};
    out.push_back({rel.generic_string(), 1, call_rows[a.call_index]->session, "train", spec.dump()});
  }
  write_manifest(dir / "manifest.csv", out);
  std::cout << "augmentation set: " << out.size() << " clips, SNR range [" << fmt(lo) << ", " << fmt(hi)
            << "] dB -> " << (dir / "manifest.csv").string() << "\n";
  return 0;
}

}  // namespace

int run_gen(const GenOptions& o, std::size_t, const std::string& config) {
  const fs::path dir = prepare_out_dir(o.out);
  if (!o.augm_from.empty()) {
    const int rc = gen_augm(o, dir);
    write_config(dir, "gen_config.ini", config);
    return rc;
  }
  DatasetOptions opts;
  opts.positive_snr_lo = o.snr_lo;
  opts.positive_snr_hi = o.snr_hi;
  opts.noise_kind = kind_filter(o.noise_kind);
  const auto ds = build_experiment_datasets(o.pos, o.neg, o.sessions, o.seed, opts);
  write_dataset(dir, ds);
  write_config(dir, "gen_config.ini", config);
  std::cout << "dataset: " << ds.clips.size() << " clips (" << o.pos << " positive, " << o.neg
            << " negative) -> " << (dir / "manifest.csv").string() << "\n";
  return 0;
}

int run_train(const TrainOptions& o, std::size_t threads, const std::string& config) {
  if (o.epochs < 1) throw InvalidArgument("--epochs must be >= 1");
  const fs::path dir = prepare_out_dir(o.out);
  const fs::path manifest(o.manifest);
  std::vector<ManifestRow> train_rows, valid_rows;
  for (auto& row : read_manifest(manifest)) {
    if (row.split == "train") train_rows.push_back(std::move(row));
    else if (row.split == "valid") valid_rows.push_back(std::move(row));
  }
  auto train_set = load_examples(manifest, train_rows, threads);
  const auto valid_set = load_examples(manifest, valid_rows, threads);
  if (!o.augm_manifest.empty()) {
    const fs::path augm(o.augm_manifest);
    const auto extra = load_examples(augm, read_manifest(augm), threads);
    train_set.insert(train_set.end(), extra.begin(), extra.end());
  }
  TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.dropout_conv = o.dropout_conv;
  tc.dropout_linear = o.dropout_linear;
  tc.seed = o.seed;
  tc.threads = threads;
  const auto progress = [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " train_loss " << r.train_loss << " valid_loss " << r.valid_loss
              << " valid_wacc " << r.valid_wacc << "\n";
  };
  const auto result = o.init_weights.empty()
                          ? train(train_set, valid_set, tc, progress)
                          : train_from(load_weights_file(o.init_weights), train_set, valid_set, tc, progress);
  save_weights_file(dir / "weights.ptrm", result.model);
  std::ostringstream hist;
  write_history_csv(hist, result.history);
  write_text_atomic(dir / "history.csv", hist.str());

  PlotSpec plot;
  plot.title = "training history";
  plot.x_label = "epoch";
  plot.y_label = "loss";
  PlotSeries tl{"train loss", {}, {}, true, false, "#1f77b4"}, vl{"valid loss", {}, {}, true, false, "#d62728"};
  for (const auto& r : result.history) {
    tl.x.push_back(r.epoch);
    tl.y.push_back(r.train_loss);
    vl.x.push_back(r.epoch);
    vl.y.push_back(r.valid_loss);
  }
  plot.series = {tl, vl};
  write_text_atomic(dir / "history.svg", render_svg(plot));
  write_config(dir, "train_config.ini", config);
  std::cout << "trained " << o.epochs << " epochs on " << train_set.size() << " clips -> "
            << (dir / "weights.ptrm").string() << "\n";
  return 0;
}

int run_psnr(const PsnrOptions& o, std::size_t threads, const std::string& config) {
  const fs::path dir = prepare_out_dir(o.out);
  const auto detector = make_detector(o);
  Pools pools;
  if (o.stimuli == "analytic") {
    if (o.pool_size < 1) throw InvalidArgument("--pool-size must be >= 1");
    for (std::size_t i = 0; i < o.pool_size; ++i) {
      pools.calls.push_back(analytic_call(derive_key(o.seed, {0x63, i})));
      pools.noises.push_back(analytic_noise(derive_key(o.seed, {0x6e, i})));
      pools.call_ids.push_back("analytic_call_" + std::to_string(i));
      pools.noise_ids.push_back("analytic_noise_" + std::to_string(i));
    }
  } else if (o.stimuli == "dataset") {
    if (o.manifest.empty()) throw InvalidArgument("--manifest is required with --stimuli dataset");
    pools = pools_from_manifest(o.manifest, o.split, kind_filter(o.noise_kind));
  } else {
    throw InvalidArgument("--stimuli must be 'dataset' or 'analytic'");
  }
  const auto calls = ClipPool::measure(std::move(pools.calls), std::move(pools.call_ids));
  const auto noises = ClipPool::measure(std::move(pools.noises), std::move(pools.noise_ids));
  const auto grid = build_eval_grid(calls.size(), noises.size(), o.snr_lo, o.snr_hi, o.step, o.n_per_point, o.seed);
  MeasureOptions mo;
  mo.threads = threads;
  auto curve = measure_curve(*detector, grid, calls, noises, mo);
  const bool fitted = fit_curve(curve, o.n_boot, o.seed, threads);

  auto report = json::parse(curve_json(curve, o.p_lo, o.p_hi));
  report["detector"] = detector->name();
  report["stimuli"] = o.stimuli;
  report["noise_kind"] = o.noise_kind;
  if (o.stimuli == "analytic") {
    if (const auto* energy = dynamic_cast<const EnergyDetector*>(detector.get()))
      report["analytic_snr_50"] = analytic_crossing_snr(energy->threshold_db());
  }
  write_text_atomic(dir / "curve.json", report.dump(2) + "\n");
  write_text_atomic(dir / "curve.csv", curve_csv(curve));
  write_text_atomic(dir / "curve.svg", curve_svg(curve, "p(snr): " + detector->name()));
  write_config(dir, "psnr_config.ini", config);
  if (curve.fit) {
    const auto m = metrics_from_fit(curve.fit->params, o.p_lo, o.p_hi);
    std::cout << "snr_50 " << fmt(m.snr_50) << " dB, infl_50 " << fmt(m.infl_50, 4) << " /dB\n";
  }
  return fitted ? 0 : 4;
}

int run_fit(const FitOptions& o, std::size_t threads, const std::string& config) {
  const fs::path dir = prepare_out_dir(o.out);
  PsychometricCurve curve;
  curve.points = points_from_csv(read_text(o.rates));
  const bool fitted = fit_curve(curve, o.n_boot, o.seed, threads);
  write_text_atomic(dir / "curve.json", json::parse(curve_json(curve, o.p_lo, o.p_hi)).dump(2) + "\n");
  write_text_atomic(dir / "curve.svg", curve_svg(curve, "p(snr) fit"));
  write_config(dir, "fit_config.ini", config);
  if (!fitted) return 4;
  const auto& f = curve.fit->params;
  std::cout << "x0 " << fmt(f.x0, 4) << " k " << fmt(f.k, 4) << " v " << fmt(f.v, 4) << "\n";
  return 0;
}

int run_area(const AreaOptions& o, const std::string& config) {
  AreaModelParams params;
  params.source_level_1m = o.l1m;
  params.source_level_uncertainty = o.uncertainty;
  params.noise_level = o.ln;
  params.calibration_offset = o.calibration_offset;
  if (!o.fit.empty()) {
    const auto curve = curve_from_json(read_text(o.fit));
    if (!curve.fit) throw DataError("curve file has no fit: " + o.fit);
    params.fit = curve.fit->params;
  }
  if (o.x0) params.fit.x0 = *o.x0;
  if (o.k) params.fit.k = *o.k;
  if (o.v) params.fit.v = *o.v;
  if (o.fit.empty() && !(o.x0 && o.k && o.v)) throw InvalidArgument("--fit or all of --x0 --k --v required");
  if (!(params.fit.k > 0.0 && params.fit.v > 0.0)) throw InvalidArgument("invalid fit: k and v must be positive");

  std::vector<double> levels{o.ln};
  if (!o.ln_range.empty()) {
    if (o.ln_range.size() != 3 || !(o.ln_range[2] > 0.0) || o.ln_range[1] < o.ln_range[0])
      throw InvalidArgument("--ln-range expects lo hi step");
    levels.clear();
    const auto n = grid_bin_count(o.ln_range[0], o.ln_range[1], o.ln_range[2]);
    for (std::size_t i = 0; i < n; ++i) levels.push_back(o.ln_range[0] + o.ln_range[2] * static_cast<double>(i));
  }

  std::ostringstream csv;
  csv << "p,noise_level,radius_m,area_m2,area_low_m2,area_high_m2\n";
  csv.precision(10);
  PlotSpec plot;
  plot.title = "detection area vs noise level";
  plot.x_label = "noise level (dB)";
  plot.y_label = "area (m^2)";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::size_t ci = 0;
  for (double p : o.p) {
    PlotSeries s{"p = " + fmt(p), {}, {}, true, true, colors[ci++ % 5]};
    for (double ln : levels) {
      params.noise_level = ln;
      const double r = detection_radius(p, params);
      const auto range = detection_area_range(p, params);
      csv << p << ',' << ln << ',' << r << ',' << range.mid << ',' << range.low << ',' << range.high << '\n';
      std::cout << "p " << fmt(p) << " Ln " << fmt(ln, 1) << " dB: r " << fmt(r, 1) << " m, A " << fmt(range.mid, 0)
                << " m^2\n";
      s.x.push_back(ln);
      s.y.push_back(range.mid);
    }
    plot.series.push_back(s);
  }
  if (!o.out.empty()) {
    const fs::path dir = prepare_out_dir(o.out);
    write_text_atomic(dir / "area.csv", csv.str());
    write_text_atomic(dir / "area.svg", render_svg(plot));
    write_config(dir, "area_config.ini", config);
  }
  return 0;
}

int run_report(const ReportOptions& o, std::size_t threads, const std::string& config) {
  const fs::path dir = prepare_out_dir(o.out);
  std::ostringstream md;
  json summary_out = json::object();
  md << "# Detection report\n\n";
  if (!o.eval.empty()) {
    if (o.manifest.empty()) throw InvalidArgument("--manifest is required with --eval");
    const fs::path manifest(o.manifest);
    std::vector<ManifestRow> rows;
    for (auto& row : read_manifest(manifest))
      if (row.split == o.split) rows.push_back(std::move(row));
    const auto examples = load_examples(manifest, rows, threads);
    std::vector<int> labels;
    for (const auto& e : examples) labels.push_back(e.label);
    md << "## Classification metrics (" << o.split << " split, " << examples.size() << " clips)\n\n";
    md << "| configuration | loss | weighted accuracy | precision | recall | F1 |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& item : o.eval) {
      const auto [name, path] = split_named(item);
      const auto model = load_weights_file(path);
      std::vector<double> scores(examples.size());
      parallel_for(examples.size(), threads, [&](std::size_t i) { scores[i] = infer(model, examples[i].spec).probability; });
      std::vector<bool> decisions;
      for (double s : scores) decisions.push_back(Score::from_probability(s).decision);
      const auto s = summary(confusion(decisions, labels), scores, labels);
      summary_out[name][o.split] = json::parse(summary_json(s));
      md << "| " << name << " | " << fmt(s.loss) << " | " << fmt(s.weighted_accuracy) << " | " << fmt(s.precision)
         << " | " << fmt(s.recall) << " | " << fmt(s.f1) << " |\n";
    }
    md << "\n";
  }
  if (!o.curve.empty()) {
    md << "## Psychometric metrics\n\n";
    md << "| curve | x0 | k | v | snr_50 (fit) | infl_50 (fit) | snr_50 (empirical) | 5-95% interval (dB) |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& item : o.curve) {
      const auto [name, path] = split_named(item);
      const auto curve = curve_from_json(read_text(path));
      std::string emp = "n/a";
      try {
        emp = fmt(metrics_empirical(curve.points).snr_50);
      } catch (const Error&) {
      }
      if (!curve.fit) {
        md << "| " << name << " | n/a | n/a | n/a | n/a | n/a | " << emp << " | n/a |\n";
        continue;
      }
      const auto& f = curve.fit->params;
      const auto m = metrics_from_fit(f);
      md << "| " << name << " | " << fmt(f.x0) << " | " << fmt(f.k, 3) << " | " << fmt(f.v, 3) << " | "
         << fmt(m.snr_50) << " | " << fmt(m.infl_50, 4) << " | " << emp << " | "
         << (m.snr_lo && m.snr_hi ? fmt(*m.snr_hi - *m.snr_lo) : std::string("n/a")) << " |\n";
    }
    md << "\n";
  }
  write_text_atomic(dir / "report.md", md.str());
  write_text_atomic(dir / "metrics.json", summary_out.dump(2) + "\n");
  write_config(dir, "report_config.ini", config);
  std::cout << md.str();
  return 0;
}

}  // namespace snrdet::cli
