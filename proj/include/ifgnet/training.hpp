#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ifgnet/data.hpp"
#include "ifgnet/metrics.hpp"
#include "ifgnet/model.hpp"
#include "ifgnet/tensor.hpp"

namespace ifgnet {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_oa = 0.0;

  std::string to_line() const;
};

// Worker parallelism from IFGNET_THREADS (default 1, clamped to >= 1).
int threads_from_env();

// Mini-batch Adam on softmax cross-entropy. Gradients of a batch are
// accumulated into a fixed number of shards that are reduced in shard order,
// so results are bit-identical for any thread count.
class Trainer {
 public:
  static constexpr std::size_t kGradShards = 8;

  Trainer(IfgNet& model, TrainConfig config);

  EpochLog run_epoch(std::span<const PatchSample> train, int epoch);
  std::vector<EpochLog> fit(std::span<const PatchSample> train,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

 private:
  void step(std::span<const PatchSample> train, std::span<const std::size_t> batch,
            double& loss_sum, std::size_t& correct);

  IfgNet& model_;
  TrainConfig config_;
  Rng shuffle_rng_;
  std::vector<IfgNet> replicas_;
};

// Argmax predictions; parallel over samples, order-preserving.
std::vector<int> predict_labels(const IfgNet& model, std::span<const PatchSample> samples,
                                int threads = 1);

ConfusionMatrix evaluate(const IfgNet& model, std::span<const PatchSample> samples,
                         int threads = 1, std::size_t batch_size = 0);

}  // namespace ifgnet
