#include <iostream>

#include "chisep/bundle.hpp"
#include "commands.hpp"
#include "output.hpp"
#include "predict.hpp"

namespace chisep::cli {

int cmd_infer(const InferOptions& o) {
  std::string raw;
  RunConfig cfg = o.common.load(&raw);
  if (o.window) cfg.inference.window = {*o.window, *o.window, *o.window};
  if (o.stride) cfg.inference.stride = {*o.stride, *o.stride, *o.stride};
  if (o.clamp) cfg.inference.clamp = true;
  cfg.validate();

  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  const AcquisitionSet acq = read_acquisition(o.input);
  const std::filesystem::path out = o.out;
  prepare_out_dir(out, false);
  const SourcePair src = predict(ckpt, acq, cfg.inference);
  write_sources(src, out);
  const auto& w = cfg.inference.window;
  const auto& s = cfg.inference.stride;
  write_json(out / "inference.json", {{"checkpoint", o.checkpoint},
                                      {"input", o.input},
                                      {"window", {w.nx, w.ny, w.nz}},
                                      {"stride", s},
                                      {"clamp", cfg.inference.clamp},
                                      {"precision", to_string(checkpoint_precision(ckpt))}});
  echo_config(out, cfg, raw);
  std::cout << "sources: " << out.string() << "\n";
  return kExitOk;
}

}  // namespace chisep::cli
