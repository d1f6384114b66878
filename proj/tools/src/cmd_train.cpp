#include <cstdio>
#include <iostream>

#include "chisep/training.hpp"
#include "commands.hpp"
#include "output.hpp"

namespace chisep::cli {

int cmd_train(const TrainOptions& o) {
  std::string raw;
  RunConfig cfg = o.common.load(&raw);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.batch) cfg.train.batch_size = *o.batch;
  if (o.base_channels) cfg.network.base_channels = *o.base_channels;
  if (o.precision) cfg.train.precision = parse_precision(*o.precision);
  if (o.no_contrastive) cfg.train.contrastive_enabled = false;
  if (o.keep_epochs) cfg.train.keep_epoch_checkpoints = true;

  const DatasetManifest manifest = read_manifest(std::filesystem::path(o.data) / "manifest.json");
  // The patch size is a property of the dataset.
  cfg.network.patch = manifest.window;
  cfg.validate();

  const std::filesystem::path out = o.out;
  prepare_out_dir(out, false);
  echo_config(out, cfg, raw);
  train(manifest, cfg.network, cfg.train, out, [](const EpochRecord& r) {
    std::printf("epoch %3d  lr %.1e  train %.6g  val %.6g\n", r.epoch, r.lr, r.train.total, r.val.total);
    std::fflush(stdout);
  });
  std::cout << "checkpoint: " << (out / "checkpoint.ckpt").string() << "\n";
  return kExitOk;
}

}  // namespace chisep::cli
