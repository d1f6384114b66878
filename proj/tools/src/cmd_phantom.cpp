#include <cstdio>
#include <iostream>

#include "chisep/bundle.hpp"
#include "chisep/phantoms.hpp"
#include "chisep/random.hpp"
#include "chisep/svol_io.hpp"
#include "commands.hpp"
#include "output.hpp"

namespace chisep::cli {
namespace {

const char* kind_name(LesionKind k) { return k == LesionKind::Hemorrhage ? "hemorrhage" : "calcification"; }
const char* shape_name(LesionShape s) {
  switch (s) {
    case LesionShape::Sphere: return "sphere";
    case LesionShape::Ellipsoid: return "ellipsoid";
    case LesionShape::Cuboid: return "cuboid";
  }
  return "?";
}

}  // namespace

int cmd_phantom(const PhantomOptions& o) {
  std::string raw;
  RunConfig cfg = o.common.load(&raw);
  const std::filesystem::path out = o.out;
  prepare_out_dir(out, false);

  nlohmann::json info = {{"kind", o.kind}, {"seed", cfg.seed}};
  if (o.kind == "brain") {
    const int n = o.size.value_or(cfg.synth.phantom_dims.nx);
    const Dims dims = o.size ? Dims{n, n, n} : cfg.synth.phantom_dims;
    Phantom ph = generate_brain_phantom(cfg.seed, dims, cfg.synth.voxel, cfg.synth.phantom);
    SourcePair src = ph.sources;
    nlohmann::json lesions = nlohmann::json::array();
    if (o.lesions > 0) {
      LesionConfig lc = cfg.synth.lesions;
      lc.min_count = lc.max_count = o.lesions;
      LesionResult lr = insert_lesions(src, ph.mask, mix_seed(cfg.seed, 0x1e51), lc);
      src = std::move(lr.sources);
      for (const Lesion& l : lr.lesions) {
        lesions.push_back({{"kind", kind_name(l.kind)},
                           {"shape", shape_name(l.shape)},
                           {"center", l.center},
                           {"radii", l.radii},
                           {"value", l.value}});
      }
    }
    write_acquisition(forward_model(src, ph.a_map, ph.mask), out);
    write_sources(src, out);
    info["dims"] = {dims.nx, dims.ny, dims.nz};
    info["lesions"] = lesions;
  } else {
    CylinderPhantomConfig cc;
    cc.voxel = cfg.synth.voxel;
    if (o.size) cc.dims = {*o.size, *o.size, cc.dims.nz};
    CylinderPhantom ph = generate_cylinder_phantom(cc);
    write_acquisition(forward_model(ph.sources, ph.a_map, ph.mask), out);
    write_sources(ph.sources, out);
    const std::filesystem::path rois = out / "rois";
    prepare_out_dir(rois, false);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        char name[32];
        std::snprintf(name, sizeof(name), "roi_r%d_c%d.svol", r, c);
        write_svol(ph.rois[r][c], rois / name);
      }
    }
    info["dims"] = {cc.dims.nx, cc.dims.ny, cc.dims.nz};
    // Row 0 diamagnetic, row 1 paramagnetic, row 2 both (same column concentrations).
    info["rows"] = {"diamagnetic", "paramagnetic", "mixed"};
    info["dia_concentration"] = cc.dia_concentration;
    info["dia_units"] = "mg/ml";
    info["para_concentration"] = cc.para_concentration;
    info["para_units"] = "ug/ml";
  }
  write_json(out / "phantom.json", info);
  echo_config(out, cfg, raw);
  std::cout << "phantom: " << out.string() << "\n";
  return kExitOk;
}

}  // namespace chisep::cli
