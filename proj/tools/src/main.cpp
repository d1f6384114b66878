#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "commands.hpp"

using namespace chisep::cli;

namespace {

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON run config; flags override its fields")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--jobs", c.jobs, "Worker threads for synthesis/evaluation")->check(CLI::PositiveNumber);
}

int run(int argc, char** argv) {
  CLI::App app{"Susceptibility source separation toolkit"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Synthesize a training set");
  add_common(s, sim.common);
  s->add_option("--out", sim.out, "Existing output directory")->required();
  s->add_option("--phantoms", sim.phantoms, "Number of phantoms");
  s->add_option("--patch", sim.patch, "Cubic patch size (multiple of 8)");
  s->add_option("--stride", sim.stride, "Patch stride");
  s->add_option("--phantom-size", sim.phantom_size, "Cubic phantom grid size");
  s->add_option("--noise", sim.noise, "Gaussian input noise sigma");
  s->add_flag("--no-lesions", sim.no_lesions, "Disable lesion augmentation");

  PhantomOptions ph;
  auto* p = app.add_subcommand("phantom", "Write a single test phantom with its acquisition");
  add_common(p, ph.common);
  p->add_option("--out", ph.out, "Output directory")->required();
  p->add_option("--kind", ph.kind, "brain | cylinder")->check(CLI::IsMember({"brain", "cylinder"}));
  p->add_option("--size", ph.size, "Cubic grid size (brain) / in-plane size (cylinder)");
  p->add_option("--lesions", ph.lesions, "Number of lesions inserted into a brain phantom")
      ->check(CLI::Range(0, 16));

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train the dual-branch network");
  add_common(t, tr.common);
  t->add_option("--data", tr.data, "Dataset directory (manifest.json)")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--batch", tr.batch, "Batch size");
  t->add_option("--base-channels", tr.base_channels, "Base channel count");
  t->add_option("--precision", tr.precision, "float | double");
  t->add_flag("--no-contrastive", tr.no_contrastive, "Train without the contrastive term");
  t->add_flag("--keep-epochs", tr.keep_epochs, "Keep a checkpoint per epoch");

  InferOptions in;
  auto* i = app.add_subcommand("infer", "Separate sources with a trained network");
  add_common(i, in.common);
  i->add_option("--checkpoint", in.checkpoint, "Checkpoint file")->required();
  i->add_option("--input", in.input, "Acquisition directory")->required();
  i->add_option("--out", in.out, "Output directory")->required();
  i->add_option("--window", in.window, "Cubic window size (multiple of 8)");
  i->add_option("--stride", in.stride, "Window stride");
  i->add_flag("--clamp", in.clamp, "Force chi_pos >= 0 and chi_neg <= 0");

  BaselineOptions bl;
  auto* b = app.add_subcommand("baseline", "Separate sources with the iterative solver");
  add_common(b, bl.common);
  b->add_option("--input", bl.input, "Acquisition directory")->required();
  b->add_option("--out", bl.out, "Output directory")->required();
  b->add_option("--max-iters", bl.max_iters, "Iteration cap");
  b->add_option("--lambda", bl.lambda, "Tikhonov weight");
  b->add_option("--w-field", bl.w_field, "Field term weight");
  b->add_option("--w-r2p", bl.w_r2p, "R2' term weight");
  b->add_option("--tolerance", bl.tolerance, "Relative decrease tolerance");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Compare reconstructions against a reference");
  add_common(e, ev.common);
  e->add_option("--reference", ev.reference, "Reference directory (chi_pos/chi_neg + mask)");
  e->add_option("--method", ev.methods, "LABEL=DIR reconstruction, repeatable");
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--mask-scope", ev.mask_scope, "brain | full")->check(CLI::IsMember({"brain", "full"}));
  e->add_option("--regression", ev.regression, "single-vs-mixed")->check(CLI::IsMember({"single-vs-mixed"}));
  e->add_option("--profile", ev.profiles, "x0,y0,z0:x1,y1,z1[:n] line profile, repeatable");
  e->add_flag("--ablation", ev.ablation, "Compare two checkpoints on a test set");
  e->add_option("--with-cl", ev.with_cl, "Checkpoint trained with the contrastive term");
  e->add_option("--without-cl", ev.without_cl, "Checkpoint trained without it");
  e->add_option("--test-data", ev.test_data, "Dataset directory for --ablation");
  e->add_option("--history", ev.history, "history.json; restricts --ablation to its validation samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitConfig;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (p->parsed()) return cmd_phantom(ph);
    if (t->parsed()) return cmd_train(tr);
    if (i->parsed()) return cmd_infer(in);
    if (b->parsed()) return cmd_baseline(bl);
    if (e->parsed()) return cmd_eval(ev);
  } catch (const chisep::InvalidArgument& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const chisep::IoError& ex) {
    std::cerr << "I/O error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const chisep::FormatError& ex) {
    std::cerr << "I/O error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const chisep::NumericError& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const chisep::UndefinedMetric& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const chisep::PlacementError& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
