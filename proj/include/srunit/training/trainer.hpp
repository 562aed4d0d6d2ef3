#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "srunit/data/dataset.hpp"
#include "srunit/data/image_pool.hpp"
#include "srunit/losses/ablations.hpp"
#include "srunit/losses/gan.hpp"
#include "srunit/losses/patch_nce.hpp"
#include "srunit/training/adam.hpp"
#include "srunit/training/config.hpp"

namespace srunit {

using Real = float;

/// Named scalars of one step, in a fixed order.
struct LossReport {
  Index epoch = 0;
  Index iteration = 0;
  std::vector<std::pair<std::string, double>> terms;

  double get(const std::string& name) const;
  bool has(const std::string& name) const;
  void set(const std::string& name, double v);
};

struct TrainState {
  TrainConfig cfg;
  std::unique_ptr<GeneratorSlices<Real>> g;
  HeadList<Real> heads;
  std::unique_ptr<PatchDiscriminator<Real>> d;
  std::unique_ptr<Adam<Real>> opt_g;  // generator + feature heads
  std::unique_ptr<Adam<Real>> opt_d;
  std::unique_ptr<ImagePool<Real>> pool;
  Rng data_rng, loss_rng;
  Index epoch = 0;
  Index iteration = 0;
  Index position = 0;           // step within the current epoch
  std::vector<Index> order_a;   // domain-A visiting order of the current epoch
  DistanceLossParams e1;
  bool e1_ready = false;

  ParamList<Real> generator_params() const;  // G then heads, the order used by opt_g
  ParamList<Real> discriminator_params() const;
};

GeneratorConfig generator_config(const TrainConfig& cfg);
DiscriminatorConfig discriminator_config(const TrainConfig& cfg);

/// Fresh state from the seed: parameters, optimizers, pool and RNG streams.
TrainState make_state(const TrainConfig& cfg);

/// Images of both domains, held as 8-bit images and converted per batch.
struct TrainData {
  std::vector<Image8> a, b;
  Index steps_per_epoch(const TrainConfig& cfg) const;
};

TrainData load_train_data(const TrainConfig& cfg);

/// One optimization step on explicit batches (N x C x H x W, values in [-1, 1]).
/// The schedule (lr, gate) follows state.epoch.
LossReport train_step(TrainState& state, const Tensor<Real>& x, const Tensor<Real>& y);

/// Draws the next batch pair from the data with the state's data stream, runs
/// train_step and advances epoch / position.
LossReport advance(TrainState& state, const TrainData& data);

/// Half-image L1 statistics of both domains (E1).
DistanceLossParams distance_stats(const TrainData& data, bool absolute);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
/// Rebuilds the state described by the checkpoint's own configuration.
TrainState load_checkpoint(const std::filesystem::path& path);
/// Loads into an existing state. Architecture keys and every array shape are
/// checked before anything is written; on mismatch CheckpointError is thrown and
/// `state` is untouched.
void load_checkpoint_into(const std::filesystem::path& path, TrainState& state);

struct RunOptions {
  bool quiet = true;
};

/// Trains until state.epoch == total_epochs, writing into run_dir:
/// config.txt, losses.csv, checkpoints/epoch_XXXX.ckpt, latest.ckpt, samples/*.png.
void train_run(TrainState& state, const TrainData& data, const std::filesystem::path& run_dir,
               const RunOptions& opt = {});

/// Translation of batch `x` with the state's generator, no tape kept.
Tensor<Real> translate(const TrainState& state, const Tensor<Real>& x);

}  // namespace srunit
