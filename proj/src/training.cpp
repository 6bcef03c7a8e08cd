#include "snrdet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "snrdet/error.hpp"
#include "snrdet/metrics.hpp"
#include "snrdet/parallel.hpp"
#include "snrdet/rng.hpp"

namespace snrdet {
namespace {

struct PreparedSet {
  std::vector<std::vector<float>> inputs;
  std::vector<int> frames;
  std::vector<int> labels;
};

PreparedSet prepare(std::span<const TrainingExample> set) {
  PreparedSet p;
  for (const auto& ex : set) {
    int f = 0;
    p.inputs.push_back(network_input(ex.spec, f));
    p.frames.push_back(f);
    p.labels.push_back(ex.label);
  }
  return p;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void validate(std::span<const TrainingExample> train_set, const TrainConfig& config) {
  if (config.epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (config.batch_size < 1) throw InvalidArgument("train: batch size must be >= 1");
  auto in_unit = [](double r) { return r > 0.0 && r < 1.0; };
  if (!in_unit(config.learning_rate) || !in_unit(config.beta1) || !in_unit(config.beta2)) {
    throw InvalidArgument("train: learning rate and Adam betas must lie in (0, 1)");
  }
  if (config.dropout_conv < 0.0 || config.dropout_conv >= 1.0 || config.dropout_linear < 0.0 ||
      config.dropout_linear >= 1.0) {
    throw InvalidArgument("train: dropout rates must lie in [0, 1)");
  }
  bool pos = false, neg = false;
  for (const auto& ex : train_set) (ex.label ? pos : neg) = true;
  if (!pos || !neg) throw InvalidArgument("train: dataset must contain both classes");
}

struct Evaluation {
  double loss = 0.0;
  double wacc = 0.0;
};

Evaluation evaluate(std::span<const float> params, const PreparedSet& set, std::size_t threads) {
  if (set.inputs.empty()) return {};
  std::vector<double> logits(set.inputs.size());
  parallel_for(set.inputs.size(), threads, [&](std::size_t i) {
    logits[i] = nn::forward<float>(params, set.inputs[i], set.frames[i], nullptr, nullptr);
  });
  Evaluation e;
  std::vector<bool> decisions;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e.loss += bce_from_logit(logits[i], set.labels[i]);
    decisions.push_back(sigmoid(logits[i]) > 0.5);
  }
  e.loss /= static_cast<double>(logits.size());
  e.wacc = weighted_accuracy_or_nan(confusion(decisions, set.labels));
  return e;
}

}  // namespace

TrainResult train_from(const DetectorModel& initial, std::span<const TrainingExample> train_set,
                       std::span<const TrainingExample> valid_set, const TrainConfig& config,
                       const std::function<void(const EpochRecord&)>& on_epoch) {
  validate(train_set, config);
  const PreparedSet train_data = prepare(train_set);
  const PreparedSet valid_data = prepare(valid_set);
  const std::size_t n = train_data.inputs.size();
  const std::size_t nparams = Architecture::parameter_count();
  const std::size_t threads = std::max<std::size_t>(1, config.threads);

  TrainResult result;
  result.model = initial;
  std::vector<float>& params = result.model.params;
  std::vector<double> m(nparams, 0.0), v(nparams, 0.0);
  std::vector<std::size_t> order(n);
  std::vector<std::vector<float>> sample_grads(static_cast<std::size_t>(config.batch_size),
                                               std::vector<float>(nparams));
  std::vector<double> sample_logit(static_cast<std::size_t>(config.batch_size));
  std::vector<double> batch_grad(nparams);
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(config.seed, {0x73687566ull, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::vector<bool> decisions(n);
    std::vector<int> labels(n);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n - start);
      const double inv = 1.0 / static_cast<double>(count);
      parallel_for(count, threads, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        auto& grad = sample_grads[b];
        std::fill(grad.begin(), grad.end(), 0.0f);
        nn::DropoutSpec drop{config.dropout_conv, config.dropout_linear,
                             derive_key(config.seed, {0x6472ull, step, b})};
        nn::ForwardCache<float> cache;
        const float z = nn::forward<float>(params, train_data.inputs[idx], train_data.frames[idx], &cache, &drop);
        sample_logit[b] = z;
        const float dz = static_cast<float>((sigmoid(z) - train_data.labels[idx]) * inv);
        nn::backward<float>(params, cache, dz, grad);
      });
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t idx = order[start + b];
        const double l = bce_from_logit(sample_logit[b], train_data.labels[idx]);
        if (!std::isfinite(l)) {
          std::ostringstream msg;
          msg << "train: non-finite loss at epoch " << epoch << ", example " << idx;
          throw NumericalError(msg.str());
        }
        loss_sum += l;
        decisions[start + b] = sigmoid(sample_logit[b]) > 0.5;
        labels[start + b] = train_data.labels[idx];
        const auto& g = sample_grads[b];
        for (std::size_t j = 0; j < nparams; ++j) batch_grad[j] += g[j];
      }
      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < nparams; ++j) {
        const double g = batch_grad[j];
        m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
        v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        params[j] = static_cast<float>(params[j] - config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon));
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_wacc = weighted_accuracy_or_nan(confusion(decisions, labels));
    if (!valid_data.inputs.empty()) {
      const auto ev = evaluate(params, valid_data, threads);
      rec.valid_loss = ev.loss;
      rec.valid_wacc = ev.wacc;
    } else {
      rec.valid_loss = std::nan("");
      rec.valid_wacc = std::nan("");
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

TrainResult train(std::span<const TrainingExample> train_set, std::span<const TrainingExample> valid_set,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  validate(train_set, config);
  return train_from(DetectorModel::initialized(config.seed), train_set, valid_set, config, on_epoch);
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,valid_loss,train_wacc,valid_wacc\n";
  out.precision(9);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.valid_loss << ',' << r.train_wacc << ','
        << r.valid_wacc << '\n';
  }
}

}  // namespace snrdet
