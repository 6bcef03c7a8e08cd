// snrdet: synthetic corpus generation, detector training, p(snr) measurement and
// detection-area modelling.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "snrdet/error.hpp"
#include "snrdet/parallel.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

int report_error(const char* kind, const std::string& message, int code) {
  std::cerr << "snrdet: error[" << kind << "]: " << message << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace snrdet::cli;
  CLI::App app{"Call detector evaluation toolkit: gen, train, psnr, fit, area, report"};
  app.set_config("--config", "", "INI file with option values (flags override it)");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::size_t threads = snrdet::default_thread_count();
  app.add_option("--threads", threads, "Worker threads (default: SNRDET_THREADS or hardware)")
      ->check(CLI::PositiveNumber);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset or an augmentation set");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--sessions", gen.sessions, "Recording sessions");
  g->add_option("--pos", gen.pos, "Positive clips");
  g->add_option("--neg", gen.neg, "Negative clips");
  g->add_option("--seed", gen.seed, "Seed");
  g->add_option("--noise-kind", gen.noise_kind, "all, rain, wind or biophony")
      ->check(CLI::IsMember({"all", "rain", "wind", "biophony"}));
  g->add_option("--snr-lo", gen.snr_lo, "Lowest SNR of positives (dB)");
  g->add_option("--snr-hi", gen.snr_hi, "Highest SNR of positives (dB)");
  g->add_option("--augm-from", gen.augm_from, "Base dataset manifest: build an augmentation set from its train split");
  g->add_option("--augm-fit", gen.augm_fit, "Curve JSON whose fit selects the SNR window");
  g->add_option("--augm-mode", gen.augm_mode, "high, transition or low")
      ->check(CLI::IsMember({"high", "transition", "low"}));
  g->add_option("--augm-range", gen.augm_range, "Explicit SNR window lo hi (dB)")->expected(2);
  g->add_option("--augm-fraction", gen.augm_fraction, "Augmented clips per positive");
  g->add_option("--augm-width", gen.augm_width, "SNR window width (dB)");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train the CNN detector");
  t->add_option("--manifest", tr.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  t->add_option("--augm-manifest", tr.augm_manifest, "Augmentation manifest added to the train split")
      ->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--init-weights", tr.init_weights, "Start from these weights")->check(CLI::ExistingFile);
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--lr", tr.lr, "Adam learning rate");
  t->add_option("--batch", tr.batch, "Batch size");
  t->add_option("--dropout-conv", tr.dropout_conv, "Dropout after each pooling layer");
  t->add_option("--dropout-linear", tr.dropout_linear, "Dropout after the hidden linear layer");
  t->add_option("--seed", tr.seed, "Seed");

  PsnrOptions ps;
  auto* p = app.add_subcommand("psnr", "Measure and fit the detection probability curve p(snr)");
  p->add_option("--weights", ps.weights, "CNN weight file")->check(CLI::ExistingFile);
  p->add_option("--detector", ps.detector, "cnn (default) or energy:<threshold_db>");
  p->add_option("--manifest", ps.manifest, "Dataset manifest supplying call and noise pools")
      ->check(CLI::ExistingFile);
  p->add_option("--stimuli", ps.stimuli, "dataset or analytic")->check(CLI::IsMember({"dataset", "analytic"}));
  p->add_option("--split", ps.split, "Manifest split used for the pools")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  p->add_option("--noise-kind", ps.noise_kind, "all, rain, wind or biophony")
      ->check(CLI::IsMember({"all", "rain", "wind", "biophony"}));
  p->add_option("--pool-size", ps.pool_size, "Pool size for analytic stimuli");
  p->add_option("--snr-lo", ps.snr_lo, "Lowest SNR (dB)");
  p->add_option("--snr-hi", ps.snr_hi, "Highest SNR (dB)");
  p->add_option("--step", ps.step, "SNR step (dB)");
  p->add_option("--n-per-point", ps.n_per_point, "Trials per SNR value");
  p->add_option("--n-boot", ps.n_boot, "Bootstrap replicates (0 disables)");
  p->add_option("--p-lo", ps.p_lo, "Lower probability of the transition interval");
  p->add_option("--p-hi", ps.p_hi, "Upper probability of the transition interval");
  p->add_option("--seed", ps.seed, "Seed");
  p->add_option("--out", ps.out, "Output directory")->required();

  FitOptions fi;
  auto* f = app.add_subcommand("fit", "Fit p(snr) to an existing rates CSV");
  f->add_option("--rates", fi.rates, "CSV with snr and successes+n or rate+n")->required()->check(CLI::ExistingFile);
  f->add_option("--n-boot", fi.n_boot, "Bootstrap replicates (0 disables)");
  f->add_option("--p-lo", fi.p_lo, "Lower probability of the transition interval");
  f->add_option("--p-hi", fi.p_hi, "Upper probability of the transition interval");
  f->add_option("--seed", fi.seed, "Seed");
  f->add_option("--out", fi.out, "Output directory")->required();

  AreaOptions ar;
  double x0 = 0.0, k = 0.0, v = 0.0;
  auto* a = app.add_subcommand("area", "Detection radius and area from a fitted curve");
  a->add_option("--fit", ar.fit, "Curve JSON from psnr or fit")->check(CLI::ExistingFile);
  auto* x0_opt = a->add_option("--x0", x0, "Curve location (dB)");
  auto* k_opt = a->add_option("--k", k, "Curve slope (1/dB)");
  auto* v_opt = a->add_option("--v", v, "Curve asymmetry");
  a->add_option("--p", ar.p, "Detection probabilities (open interval 0-1)");
  a->add_option("--l1m", ar.l1m, "Source level at 1 m (dB)");
  a->add_option("--uncertainty", ar.uncertainty, "Source level uncertainty (+- dB)");
  a->add_option("--ln", ar.ln, "Noise level (dB)");
  a->add_option("--ln-range", ar.ln_range, "Noise level table: lo hi step")->expected(3);
  a->add_option("--calibration-offset", ar.calibration_offset, "dB added to digital levels");
  a->add_option("--out", ar.out, "Output directory for area.csv and area.svg");

  ReportOptions re;
  auto* r = app.add_subcommand("report", "Markdown summary of classification and p(snr) metrics");
  r->add_option("--manifest", re.manifest, "Dataset manifest for classification metrics")->check(CLI::ExistingFile);
  r->add_option("--split", re.split, "Split to evaluate")->check(CLI::IsMember({"train", "valid", "test"}));
  r->add_option("--eval", re.eval, "name=weights.ptrm (repeatable)");
  r->add_option("--curve", re.curve, "name=curve.json (repeatable)");
  r->add_option("--out", re.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  // Audit trail: the active subcommand's fully resolved options.
  CLI::App* active = app.get_subcommands().front();
  std::string config = "threads=" + std::to_string(threads) + "\n[" + active->get_name() + "]\n";
  {
    // Unset paths and lists are left out so the file can be fed back through --config.
    std::istringstream lines(active->config_to_str(true, false));
    for (std::string line; std::getline(lines, line);) {
      if (line.ends_with("=\"{}\"") || line.ends_with("=\"\"")) continue;
      config += line + "\n";
    }
  }
  try {
    if (*g) return run_gen(gen, threads, config);
    if (*t) return run_train(tr, threads, config);
    if (*p) return run_psnr(ps, threads, config);
    if (*f) return run_fit(fi, threads, config);
    if (*a) {
      if (x0_opt->count()) ar.x0 = x0;
      if (k_opt->count()) ar.k = k;
      if (v_opt->count()) ar.v = v;
      return run_area(ar, config);
    }
    if (*r) return run_report(re, threads, config);
  } catch (const snrdet::InvalidArgument& e) {
    return report_error("usage", e.what(), kUsage);
  } catch (const snrdet::DataError& e) {
    return report_error("data", e.what(), kData);
  } catch (const snrdet::NumericalError& e) {
    return report_error("numerical", e.what(), kNumerical);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("data", e.what(), kData);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return kUsage;
}
