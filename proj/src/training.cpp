#include "ifgnet/training.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "ifgnet/error.hpp"

namespace ifgnet {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::string EpochLog::to_line() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "epoch=%d loss=%.6f train_oa=%.2f", epoch, mean_loss,
                100.0 * train_oa);
  return buf;
}

int threads_from_env() {
  const char* env = std::getenv("IFGNET_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return std::max(n, 1);
}

namespace {

// Runs work(i) for i in [0, count) on up to `threads` workers; worker t takes
// i = t, t + T, ...
template <typename Work>
void parallel_for(std::size_t count, int threads, Work&& work) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += workers) work(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Trainer::Trainer(IfgNet& model, TrainConfig config)
    : model_(model), config_(config), shuffle_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  replicas_.assign(kGradShards, model_);
}

void Trainer::step(std::span<const PatchSample> train, std::span<const std::size_t> batch,
                   double& loss_sum, std::size_t& correct) {
  auto master = model_.parameters();
  const std::size_t n = batch.size();
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<double> losses(n, 0.0);
  std::vector<char> hits(n, 0);

  parallel_for(kGradShards, config_.threads, [&](std::size_t s) {
    IfgNet& replica = replicas_[s];
    auto params = replica.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i].param->value = master[i].param->value;
      params[i].param->zero_grad();
    }
    const std::size_t begin = s * n / kGradShards;
    const std::size_t end = (s + 1) * n / kGradShards;
    IfgNet::Cache cache;
    for (std::size_t b = begin; b < end; ++b) {
      const PatchSample& sample = train[batch[b]];
      const std::vector<double> logits = replica.forward(sample, cache);
      CrossEntropy ce = cross_entropy(logits, sample.label);
      losses[b] = ce.loss;
      hits[b] = argmax(logits) == sample.label;
      for (double& g : ce.d_logits) g *= scale;
      replica.backward(cache, ce.d_logits);
    }
  });

  std::vector<std::vector<NamedParameter>> shard_params;
  shard_params.reserve(kGradShards);
  for (auto& replica : replicas_) shard_params.push_back(replica.parameters());
  for (std::size_t i = 0; i < master.size(); ++i) {
    Parameter& p = *master[i].param;
    p.zero_grad();
    auto grad = p.grad.data();
    for (std::size_t s = 0; s < kGradShards; ++s) {
      const auto part = shard_params[s][i].param->grad.data();
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += part[k];
    }
    adam_step(p, config_.adam);
  }
  for (std::size_t b = 0; b < n; ++b) {
    loss_sum += losses[b];
    correct += static_cast<std::size_t>(hits[b]);
  }
}

EpochLog Trainer::run_epoch(std::span<const PatchSample> train, int epoch) {
  if (train.empty()) throw ConfigError("training set is empty");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_rng_.shuffle(std::span<std::size_t>(order));

  double loss_sum = 0.0;
  std::size_t correct = 0;
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t len = std::min(bs, order.size() - start);
    step(train, std::span<const std::size_t>(order).subspan(start, len), loss_sum, correct);
  }
  EpochLog log;
  log.epoch = epoch;
  log.mean_loss = loss_sum / static_cast<double>(train.size());
  log.train_oa = static_cast<double>(correct) / static_cast<double>(train.size());
  return log;
}

std::vector<EpochLog> Trainer::fit(std::span<const PatchSample> train,
                                   const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  for (int e = 1; e <= config_.epochs; ++e) {
    logs.push_back(run_epoch(train, e));
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

std::vector<int> predict_labels(const IfgNet& model, std::span<const PatchSample> samples,
                                int threads) {
  std::vector<int> out(samples.size(), 0);
  parallel_for(samples.size(), threads,
               [&](std::size_t i) { out[i] = argmax(model.forward(samples[i])); });
  return out;
}

ConfusionMatrix evaluate(const IfgNet& model, std::span<const PatchSample> samples, int threads,
                         std::size_t batch_size) {
  ConfusionMatrix cm(static_cast<std::size_t>(model.config().num_classes));
  const std::size_t chunk = batch_size == 0 ? std::max<std::size_t>(samples.size(), 1) : batch_size;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const auto part = samples.subspan(start, std::min(chunk, samples.size() - start));
    const std::vector<int> pred = predict_labels(model, part, threads);
    ConfusionMatrix shard(cm.classes());
    for (std::size_t i = 0; i < part.size(); ++i) shard.accumulate(part[i].label, pred[i]);
    cm.merge(shard);
  }
  return cm;
}

}  // namespace ifgnet
