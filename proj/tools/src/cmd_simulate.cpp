#include <iostream>

#include "chisep/errors.hpp"
#include "chisep/synth.hpp"
#include "commands.hpp"
#include "output.hpp"

namespace chisep::cli {

int cmd_simulate(const SimulateOptions& o) {
  std::string raw;
  RunConfig cfg = o.common.load(&raw);
  if (o.phantoms) cfg.phantoms = *o.phantoms;
  if (o.phantom_size) cfg.synth.phantom_dims = {*o.phantom_size, *o.phantom_size, *o.phantom_size};
  if (o.patch) {
    cfg.synth.window = {*o.patch, *o.patch, *o.patch};
    cfg.network.patch = cfg.synth.window;
    if (!o.stride) cfg.synth.stride = {*o.patch, *o.patch, *o.patch};
  }
  if (o.stride) cfg.synth.stride = {*o.stride, *o.stride, *o.stride};
  if (o.noise) cfg.synth.noise_sigma = *o.noise;
  if (o.no_lesions) cfg.synth.lesion_augmentation = false;
  // Patches feed the network directly, so they obey its size rules.
  NetworkConfig patch_check = cfg.network;
  patch_check.patch = cfg.synth.window;
  patch_check.validate();
  cfg.validate();

  const std::filesystem::path out = o.out;
  prepare_out_dir(out, true);
  const DatasetManifest m = build_training_set(cfg.phantoms, cfg.seed, cfg.synth, out);
  echo_config(out, cfg, raw);
  std::cout << "manifest: " << (out / "manifest.json").string() << "\n"
            << "samples: " << m.samples.size() << "\n";
  return kExitOk;
}

}  // namespace chisep::cli
