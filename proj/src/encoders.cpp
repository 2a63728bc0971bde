#include "ifgnet/encoders.hpp"

#include "ifgnet/error.hpp"

namespace ifgnet {

KanEncoder::KanEncoder(Modality modality, std::size_t channels, std::size_t latent_dim,
                       SplineGrid grid)
    : modality_(modality), first_(channels, latent_dim, grid), second_(latent_dim, latent_dim, grid) {
  if (modality == Modality::kLidar && channels != 1) {
    throw ConfigError("lidar encoder takes exactly one channel");
  }
}

void KanEncoder::initialize(Rng& rng) {
  first_.initialize(rng);
  second_.initialize(rng);
}

void KanEncoder::check_input(const DenseTensor& patch) const {
  if (patch.rank() != 2 || patch.dim(1) != channels()) {
    throw ShapeError(std::string(modality_ == Modality::kHsi ? "hsi" : "lidar") +
                     " encoder: expected (P^2, " + std::to_string(channels()) + ") patch, got " +
                     patch.shape_string());
  }
}

DenseTensor KanEncoder::encode(const DenseTensor& patch) const {
  check_input(patch);
  return second_.forward(first_.forward(patch));
}

DenseTensor KanEncoder::encode(const DenseTensor& patch, Cache& cache) const {
  check_input(patch);
  return second_.forward(first_.forward(patch, cache.first), cache.second);
}

DenseTensor KanEncoder::backward(const Cache& cache, const DenseTensor& d_latent) {
  return first_.backward(cache.first, second_.backward(cache.second, d_latent));
}

void KanEncoder::collect_parameters(std::string_view prefix, std::vector<NamedParameter>& out) {
  const std::string p(prefix);
  first_.collect_parameters(p + ".layer0", out);
  second_.collect_parameters(p + ".layer1", out);
}

void KanEncoder::zero_grad() {
  first_.zero_grad();
  second_.zero_grad();
}

}  // namespace ifgnet
