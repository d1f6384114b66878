#include "chisep/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/random.hpp"
#include "chisep/svol_io.hpp"

namespace chisep {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> crop_origins_1d(int length, int window, int stride) {
  if (window < 1 || stride < 1) throw InvalidArgument("crop: window and stride must be >= 1");
  if (window > length) {
    throw InvalidArgument("crop: window " + std::to_string(window) + " exceeds dimension " + std::to_string(length));
  }
  std::vector<int> o;
  for (int p = 0; p + window <= length; p += stride) o.push_back(p);
  if (o.back() + window < length) o.push_back(length - window);
  return o;
}

std::vector<Index3> crop_patches(const Dims& dims, const Dims& window, const Index3& stride) {
  const auto ox = crop_origins_1d(dims.nx, window.nx, stride[0]);
  const auto oy = crop_origins_1d(dims.ny, window.ny, stride[1]);
  const auto oz = crop_origins_1d(dims.nz, window.nz, stride[2]);
  std::vector<Index3> out;
  out.reserve(ox.size() * oy.size() * oz.size());
  for (int z : oz)
    for (int y : oy)
      for (int x : ox) out.push_back({x, y, z});
  return out;
}

void NormStats::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (!std::isfinite(mean[c]) || !std::isfinite(std[c]) || !(std[c] > 0.0)) {
      throw InvalidArgument(std::string("NormStats: invalid statistics for channel ") + kChannelNames[c]);
    }
  }
}

json NormStats::to_json() const {
  json j = json::object();
  for (int c = 0; c < 3; ++c) j[kChannelNames[c]] = {{"mean", mean[c]}, {"std", std[c]}};
  return j;
}

NormStats NormStats::from_json(const json& j) {
  NormStats n;
  for (int c = 0; c < 3; ++c) {
    n.mean[c] = j.at(kChannelNames[c]).at("mean").get<double>();
    n.std[c] = j.at(kChannelNames[c]).at("std").get<double>();
  }
  n.validate();
  return n;
}

namespace {

json dims_json(const Dims& d) { return {d.nx, d.ny, d.nz}; }
Dims dims_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }
json idx_json(const Index3& i) { return {i[0], i[1], i[2]}; }
Index3 idx_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }
json pair_json(const std::array<double, 2>& a) { return {a[0], a[1]}; }
std::array<double, 2> pair_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Volume3D quantize(const Volume3D& v) {
  Volume3D q = v;
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = to_f32(q[i]);
  return q;
}

struct RawSample {
  std::array<Volume3D, 3> inputs;  // physical units
  Volume3D pos, neg, a;
  MaskVolume mask;
  Index3 origin;
  bool lesioned;
};

RawSample synthesize(const SourcePair& src, const Volume3D& a, const MaskVolume& mask, const Index3& origin,
                     bool lesioned, double noise_sigma, std::uint64_t noise_seed) {
  // Labels are rounded to float32 before synthesis so that the stored
  // labels reproduce the stored inputs under the forward model.
  SourcePair q{quantize(src.chi_pos), quantize(src.chi_neg)};
  DecayKernelMap aq(quantize(a));
  AcquisitionSet acq = forward_model(q, aq, mask);
  RawSample s{{std::move(acq.r2_prime), std::move(acq.local_field), std::move(acq.qsm)},
              std::move(q.chi_pos),
              std::move(q.chi_neg),
              aq.volume(),
              mask,
              origin,
              lesioned};
  if (noise_sigma > 0.0) {
    Rng rng(noise_seed);
    std::normal_distribution<double> n(0.0, noise_sigma);
    for (auto& ch : s.inputs)
      for (std::size_t i = 0; i < ch.size(); ++i) ch[i] += n(rng);
  }
  return s;
}

std::vector<RawSample> phantom_samples(int p, std::uint64_t seed, const SynthConfig& cfg) {
  const Phantom ph = generate_brain_phantom(mix_seed(seed, 2ull * static_cast<std::uint64_t>(p)), cfg.phantom_dims,
                                            cfg.voxel, cfg.phantom);
  const auto origins = crop_patches(cfg.phantom_dims, cfg.window, cfg.stride);
  std::vector<RawSample> out;
  const std::uint64_t phantom_stream = mix_seed(seed, 2ull * static_cast<std::uint64_t>(p) + 1);
  for (std::size_t o = 0; o < origins.size(); ++o) {
    const Index3& org = origins[o];
    SourcePair patch{crop(ph.sources.chi_pos, org, cfg.window), crop(ph.sources.chi_neg, org, cfg.window)};
    Volume3D a = crop(ph.a_map.volume(), org, cfg.window);
    MaskVolume m = crop(ph.mask, org, cfg.window);
    out.push_back(synthesize(patch, a, m, org, false, cfg.noise_sigma, mix_seed(phantom_stream, 3 * o)));
    if (cfg.lesion_augmentation) {
      // Patches that miss the brain place lesions anywhere in the patch.
      const MaskVolume placement = m.count() > 0 ? m : MaskVolume(cfg.window, cfg.voxel, true);
      LesionResult les = insert_lesions(patch, placement, mix_seed(phantom_stream, 3 * o + 1), cfg.lesions);
      out.push_back(synthesize(les.sources, a, m, org, true, cfg.noise_sigma, mix_seed(phantom_stream, 3 * o + 2)));
    }
  }
  return out;
}

std::string sample_dir_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05zu", i);
  return std::string("samples/") + buf;
}

}  // namespace

void SynthConfig::validate() const {
  validate_grid(phantom_dims, voxel);
  validate_grid(window, voxel);
  for (int a = 0; a < 3; ++a) {
    if (window[a] > phantom_dims[a]) throw InvalidArgument("SynthConfig: window exceeds phantom dims");
    if (stride[a] < 1) throw InvalidArgument("SynthConfig: stride must be >= 1");
  }
  if (noise_sigma < 0.0 || !std::isfinite(noise_sigma)) throw InvalidArgument("SynthConfig: noise_sigma must be >= 0");
  if (jobs < 1) throw InvalidArgument("SynthConfig: jobs must be >= 1");
}

json SynthConfig::to_json() const {
  return {{"phantom_dims", dims_json(phantom_dims)},
          {"voxel_size_mm", {voxel.dx, voxel.dy, voxel.dz}},
          {"window", dims_json(window)},
          {"stride", idx_json(stride)},
          {"lesion_augmentation", lesion_augmentation},
          {"noise_sigma", noise_sigma},
          {"phantom",
           {{"a0", phantom.a0},
            {"a_modulation", phantom.a_modulation},
            {"min_structures", phantom.min_structures},
            {"max_structures", phantom.max_structures},
            {"pos_range", pair_json(phantom.pos_range)},
            {"neg_range", pair_json(phantom.neg_range)},
            {"pos_background", pair_json(phantom.pos_background)},
            {"neg_background", pair_json(phantom.neg_background)},
            {"smooth_sigma", phantom.smooth_sigma}}},
          {"lesions",
           {{"min_count", lesions.min_count},
            {"max_count", lesions.max_count},
            {"min_radius", lesions.min_radius},
            {"max_radius", lesions.max_radius},
            {"hemorrhage_range", pair_json(lesions.hemorrhage_range)},
            {"calcification_range", pair_json(lesions.calcification_range)},
            {"hemorrhage_probability", lesions.hemorrhage_probability},
            {"max_retries", lesions.max_retries}}}};
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw InvalidArgument("unknown " + where + " key '" + key + "'");
    }
  }
}

}  // namespace

SynthConfig SynthConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"phantom_dims", "voxel_size_mm", "window", "stride", "lesion_augmentation", "noise_sigma", "phantom",
                  "lesions"},
                 "synth");
  SynthConfig c;
  if (j.contains("phantom_dims")) c.phantom_dims = dims_from(j["phantom_dims"]);
  if (j.contains("voxel_size_mm")) {
    const auto& v = j["voxel_size_mm"];
    c.voxel = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
  }
  if (j.contains("window")) c.window = dims_from(j["window"]);
  if (j.contains("stride")) c.stride = idx_from(j["stride"]);
  if (j.contains("lesion_augmentation")) c.lesion_augmentation = j["lesion_augmentation"].get<bool>();
  if (j.contains("noise_sigma")) c.noise_sigma = j["noise_sigma"].get<double>();
  if (j.contains("phantom")) {
    const auto& p = j["phantom"];
    reject_unknown(p,
                   {"a0", "a_modulation", "min_structures", "max_structures", "pos_range", "neg_range",
                    "pos_background", "neg_background", "smooth_sigma"},
                   "synth.phantom");
    c.phantom.a0 = p.value("a0", c.phantom.a0);
    c.phantom.a_modulation = p.value("a_modulation", c.phantom.a_modulation);
    c.phantom.min_structures = p.value("min_structures", c.phantom.min_structures);
    c.phantom.max_structures = p.value("max_structures", c.phantom.max_structures);
    if (p.contains("pos_range")) c.phantom.pos_range = pair_from(p["pos_range"]);
    if (p.contains("neg_range")) c.phantom.neg_range = pair_from(p["neg_range"]);
    if (p.contains("pos_background")) c.phantom.pos_background = pair_from(p["pos_background"]);
    if (p.contains("neg_background")) c.phantom.neg_background = pair_from(p["neg_background"]);
    c.phantom.smooth_sigma = p.value("smooth_sigma", c.phantom.smooth_sigma);
  }
  if (j.contains("lesions")) {
    const auto& l = j["lesions"];
    reject_unknown(l,
                   {"min_count", "max_count", "min_radius", "max_radius", "hemorrhage_range", "calcification_range",
                    "hemorrhage_probability", "max_retries"},
                   "synth.lesions");
    c.lesions.min_count = l.value("min_count", c.lesions.min_count);
    c.lesions.max_count = l.value("max_count", c.lesions.max_count);
    c.lesions.min_radius = l.value("min_radius", c.lesions.min_radius);
    c.lesions.max_radius = l.value("max_radius", c.lesions.max_radius);
    if (l.contains("hemorrhage_range")) c.lesions.hemorrhage_range = pair_from(l["hemorrhage_range"]);
    if (l.contains("calcification_range")) c.lesions.calcification_range = pair_from(l["calcification_range"]);
    c.lesions.hemorrhage_probability = l.value("hemorrhage_probability", c.lesions.hemorrhage_probability);
    c.lesions.max_retries = l.value("max_retries", c.lesions.max_retries);
  }
  c.validate();
  return c;
}

json DatasetManifest::to_json() const {
  json s = json::array();
  for (const auto& r : samples) {
    s.push_back({{"dir", r.dir}, {"phantom", r.phantom}, {"origin", idx_json(r.origin)}, {"lesioned", r.lesioned}});
  }
  return {{"version", version},
          {"seed", seed},
          {"n_phantoms", n_phantoms},
          {"patch_dims", dims_json(window)},
          {"stride", idx_json(stride)},
          {"norm_stats", norm.to_json()},
          {"config", config.to_json()},
          {"channels", {kChannelNames[0], kChannelNames[1], kChannelNames[2]}},
          {"samples", s}};
}

DatasetManifest build_training_set(int n_phantoms, std::uint64_t seed, const SynthConfig& cfg,
                                   const fs::path& out_dir) {
  if (n_phantoms < 1) throw InvalidArgument("build_training_set: n_phantoms must be >= 1");
  cfg.validate();

  std::vector<std::vector<RawSample>> per_phantom(static_cast<std::size_t>(n_phantoms));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int p = next++; p < n_phantoms; p = next++) {
      per_phantom[static_cast<std::size_t>(p)] = phantom_samples(p, seed, cfg);
    }
  };
  const int n_workers = std::min(cfg.jobs, n_phantoms);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  // Two-pass statistics in a fixed order, independent of worker count.
  NormStats norm;
  for (int c = 0; c < 3; ++c) {
    long double sum = 0.0L;
    std::size_t n = 0;
    for (const auto& ps : per_phantom)
      for (const auto& s : ps) {
        for (double v : s.inputs[c].data()) sum += v;
        n += s.inputs[c].size();
      }
    const long double mean = sum / static_cast<long double>(n);
    long double ss = 0.0L;
    for (const auto& ps : per_phantom)
      for (const auto& s : ps)
        for (double v : s.inputs[c].data()) ss += (v - mean) * (v - mean);
    norm.mean[c] = static_cast<double>(mean);
    norm.std[c] = static_cast<double>(std::sqrt(ss / static_cast<long double>(n)));
  }
  norm.validate();

  DatasetManifest m;
  m.seed = seed;
  m.n_phantoms = n_phantoms;
  m.window = cfg.window;
  m.stride = cfg.stride;
  m.norm = norm;
  m.config = cfg;
  m.root = out_dir;

  if (!fs::is_directory(out_dir)) throw IoError("output directory does not exist", out_dir.string());
  std::size_t index = 0;
  for (int p = 0; p < n_phantoms; ++p) {
    for (auto& s : per_phantom[static_cast<std::size_t>(p)]) {
      SampleRecord rec{sample_dir_name(index++), p, s.origin, s.lesioned};
      const fs::path dir = out_dir / rec.dir;
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw IoError("cannot create sample directory", dir.string());
      for (int c = 0; c < 3; ++c) {
        Volume3D v = s.inputs[c];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = norm.normalize(c, v[i]);
        v.set_units("normalized");
        write_svol(v, dir / (std::string(kChannelNames[c]) + ".svol"));
      }
      write_svol(s.pos, dir / "chi_pos.svol");
      write_svol(s.neg, dir / "chi_neg.svol");
      write_svol(s.a, dir / "a_map.svol");
      write_svol(s.mask, dir / "mask.svol");
      m.samples.push_back(std::move(rec));
    }
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest", path.string());
  out << m.to_json().dump(2) << "\n";
  if (!out) throw IoError("manifest write failed", path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest", path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), 0);
  }
  DatasetManifest m;
  try {
    m.version = j.at("version").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_phantoms = j.at("n_phantoms").get<int>();
    m.window = dims_from(j.at("patch_dims"));
    m.stride = idx_from(j.at("stride"));
    m.norm = NormStats::from_json(j.at("norm_stats"));
    m.config = SynthConfig::from_json(j.at("config"));
    for (const auto& s : j.at("samples")) {
      m.samples.push_back(SampleRecord{s.at("dir").get<std::string>(), s.at("phantom").get<int>(),
                                       idx_from(s.at("origin")), s.at("lesioned").get<bool>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest schema error: ") + e.what(), 0);
  }
  m.root = path.parent_path();
  for (const auto& s : m.samples) {
    for (const char* name : {"r2_prime", "local_field", "qsm", "chi_pos", "chi_neg", "a_map", "mask"}) {
      const fs::path f = m.root / s.dir / (std::string(name) + ".svol");
      if (!fs::exists(f)) throw IoError("manifest references missing file", f.string());
    }
  }
  return m;
}

TrainingSample load_sample(const DatasetManifest& m, std::size_t index) {
  if (index >= m.samples.size()) throw InvalidArgument("load_sample: index out of range");
  const auto& rec = m.samples[index];
  const fs::path dir = m.root / rec.dir;
  TrainingSample s;
  for (int c = 0; c < 3; ++c) s.inputs[c] = read_svol(dir / (std::string(kChannelNames[c]) + ".svol"));
  s.label_pos = read_svol(dir / "chi_pos.svol");
  s.label_neg = read_svol(dir / "chi_neg.svol");
  s.a_patch = read_svol(dir / "a_map.svol");
  s.mask = read_svol_mask(dir / "mask.svol");
  s.origin = rec.origin;
  s.lesioned = rec.lesioned;
  return s;
}

AcquisitionSet sample_acquisition(const TrainingSample& s, const NormStats& norm) {
  std::array<Volume3D, 3> phys = s.inputs;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < phys[c].size(); ++i) phys[c][i] = norm.denormalize(c, phys[c][i]);
  phys[kR2Prime].set_units("1/s");
  phys[kLocalField].set_units("ppm");
  phys[kQsm].set_units("ppm");
  return AcquisitionSet{std::move(phys[kLocalField]), std::move(phys[kR2Prime]), std::move(phys[kQsm]),
                        DecayKernelMap(s.a_patch), s.mask};
}

}  // namespace chisep
