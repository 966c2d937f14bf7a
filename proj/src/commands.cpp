// Copyright 2026 The BSConv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bsconv/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <variant>

#include "bsconv/analysis.hpp"
#include "bsconv/blueprint_conv.hpp"
#include "bsconv/conv_ops.hpp"
#include "bsconv/model.hpp"
#include "bsconv/parallel.hpp"
#include "bsconv/rng.hpp"
#include "bsconv/toy_dataset.hpp"
#include "bsconv/train.hpp"
#include "bsconv/weight_file.hpp"
#include "json.hpp"

namespace bsconv {

namespace {

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

std::string global_text(const GlobalOptions& g) {
  return "seed=" + std::to_string(g.seed) + " dtype=" + std::string(dtype_name(g.dtype)) +
         " out_dir=" + g.out_dir.string() + " threads=" + std::to_string(g.threads);
}

bool apply_globals(const GlobalOptions& g, std::ostream& err) {
  if (g.threads < 1) {
    err << "error: --threads must be >= 1\n";
    return false;
  }
  set_thread_count(g.threads);
  return true;
}

}  // namespace

// ---- verify ---------------------------------------------------------------

template <Scalar T>
EquivalenceReport run_equivalence_suite(std::size_t trials, std::size_t max_channels, std::size_t max_spatial,
                                        std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("equivalence suite needs at least one trial");
  if (max_channels < 1 || max_spatial < 1) throw std::invalid_argument("equivalence sizes must be >= 1");
  constexpr std::size_t kKernels[] = {1, 3, 5};
  constexpr double kRatios[] = {1.0 / 6.0, 1.0 / 3.0, 1.0};

  Rng rng(seed);
  EquivalenceReport report;
  FamilyResult fu{"bsconv_u", trials, 0.0};
  FamilyResult fs{"bsconv_s", trials, 0.0};
  FamilyResult fd{"dsc_duality", trials, 0.0};
  const auto channels = [&] { return 1 + rng.below(max_channels); };
  const auto spatial = [&] { return 1 + rng.below(max_spatial); };

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t k = kKernels[t % 3];
    const ConvGeometry geom = ConvGeometry::same(k, 1 + rng.below(2));
    const std::size_t y = spatial(), x = spatial();
    std::size_t m = channels();
    const std::size_t n = channels();
    const Tensor<T> input = Tensor<T>::random_normal({m, y, x}, rng.next(), T(1));

    const auto pu = BsconvUParams<T>::init(m, n, k, rng.next());
    fu.max_rel_error = std::max(
        fu.max_rel_error, relative_error(bsconv_u_forward(input, pu, geom), conv2d_standard(input, materialize_u(pu), geom)));

    double ratio = kRatios[(t / 3) % 3];
    std::size_t ms = m;
    if (t == 0) ms = 1;                                        // M' = 1 regardless of p
    if (t == 1) ms = std::min<std::size_t>(12, max_channels), ratio = 1.0 / 6.0;  // p*M integral
    if (t == 2) ms = std::min<std::size_t>(7, max_channels), ratio = 1.0 / 6.0;   // p*M fractional
    const Tensor<T> input_s = ms == m ? input : Tensor<T>::random_normal({ms, y, x}, rng.next(), T(1));
    const auto ps = BsconvSParams<T>::init(ms, n, k, ratio, rng.next());
    fs.max_rel_error = std::max(fs.max_rel_error, relative_error(bsconv_s_forward(input_s, ps, geom),
                                                                 conv2d_standard(input_s, materialize_s(ps), geom)));

    const Tensor<T> dw = Tensor<T>::random_normal({m, k, k}, rng.next(), T(1));
    const Tensor<T> pw = Tensor<T>::random_normal({n, m}, rng.next(), T(1));
    fd.max_rel_error = std::max(fd.max_rel_error, relative_error(dsc_block(input, dw, pw, geom),
                                                                 conv2d_standard(input, cross_kernel_materialize(pw, dw), geom)));

    if (t < 10 && !report.order_witness) {
      // Same blueprints and weights, applied in the two orders. Needs M == N.
      const Tensor<T> sq = Tensor<T>::random_normal({m, m}, rng.next(), T(1));
      const BsconvUParams<T> reversed{dw, sq};
      const double diff = relative_error(bsconv_u_forward(input, reversed, geom), dsc_block(input, dw, sq, geom));
      if (diff > 1e-3) report.order_witness = t;
    }
  }
  report.families = {fu, fs, fd};
  return report;
}

bool parse_verify_sizes(const std::string& text, std::size_t& max_channels, std::size_t& max_spatial) {
  const auto pos = text.find('x');
  if (pos == std::string::npos) return false;
  try {
    std::size_t used = 0;
    const auto c = std::stoul(text.substr(0, pos), &used);
    if (used != pos) return false;
    const std::string rest = text.substr(pos + 1);
    const auto s = std::stoul(rest, &used);
    if (used != rest.size() || c < 1 || s < 1) return false;
    max_channels = c;
    max_spatial = s;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

int cmd_verify(const GlobalOptions& global, const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  if (!apply_globals(global, err)) return kExitUsage;
  if (options.trials < 1) {
    err << "error: --trials must be >= 1\n";
    return kExitUsage;
  }
  if (!(options.tolerance >= 0.0)) {
    err << "error: --tolerance must be >= 0\n";
    return kExitUsage;
  }
  out << "# verify " << global_text(global) << " trials=" << options.trials << " sizes=" << options.max_channels
      << 'x' << options.max_spatial << " tolerance=" << sci(options.tolerance) << '\n';

  const EquivalenceReport report =
      global.dtype == DType::kFloat32
          ? run_equivalence_suite<float>(options.trials, options.max_channels, options.max_spatial, global.seed)
          : run_equivalence_suite<double>(options.trials, options.max_channels, options.max_spatial, global.seed);

  bool ok = true;
  out << "family,trials,max_rel_error,status\n";
  for (const auto& f : report.families) {
    const bool pass = f.max_rel_error < options.tolerance;
    ok = ok && pass;
    out << f.family << ',' << f.trials << ',' << sci(f.max_rel_error) << ',' << (pass ? "ok" : "FAIL") << '\n';
  }
  if (report.order_witness) {
    out << "# order witness: pointwise/depthwise order matters at trial " << *report.order_witness << '\n';
  } else if (options.trials >= 10) {
    out << "# order witness: none found in 10 trials\n";
    ok = false;
  }
  out << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitFailure;
}

// ---- analyze --------------------------------------------------------------

namespace {

struct ModeSummary {
  std::vector<VarianceHistogram> histograms;
  bool centered = true;
};

template <Scalar T>
ModeSummary analyze_mode(const Tensor<T>& kernels, std::span<const std::string> groups, std::size_t bins,
                         bool centered) {
  return {analyze_kernel_set(kernels, groups, bins, centered), centered};
}

}  // namespace

int cmd_analyze(const GlobalOptions& global, const AnalyzeOptions& options, std::ostream& out, std::ostream& err) {
  if (!apply_globals(global, err)) return kExitUsage;
  if (options.bins < 1) {
    err << "error: --bins must be >= 1\n";
    return kExitUsage;
  }
  out << "# analyze " << global_text(global) << " file=" << options.weights.string() << " entry=" << options.entry
      << " bins=" << options.bins << " centered=" << (options.centered ? "true" : "false") << '\n';

  WeightFile wf;
  try {
    wf = WeightFile::load(options.weights);
  } catch (const WeightFileError& e) {
    err << "error: " << options.weights.string() << ": " << e.what() << '\n';
    return kExitUsage;
  }
  const WeightEntry* entry = wf.find(options.entry);
  if (!entry) {
    err << "error: no entry named '" << options.entry << "' in " << options.weights.string() << "; available:";
    for (const auto& e : wf.entries()) err << ' ' << e.name;
    err << '\n';
    return kExitUsage;
  }
  const Shape& shape = shape_of(entry->tensor);
  if (shape.size() != 4) {
    err << "error: entry '" << options.entry << "' has shape " << shape_text(shape)
        << ", expected a 4-axis kernel tensor [N,M,K,K]\n";
    return kExitUsage;
  }
  if (!options.groups.empty() && options.groups.size() != shape[0]) {
    err << "error: " << options.groups.size() << " group labels given for " << shape[0] << " filters\n";
    return kExitUsage;
  }

  std::vector<ModeSummary> modes;
  try {
    for (bool centered : {options.centered, !options.centered}) {
      modes.push_back(std::visit(
          [&](const auto& t) { return analyze_mode(t, options.groups, options.bins, centered); }, entry->tensor));
    }
  } catch (const std::domain_error& e) {
    err << "error: entry '" << options.entry << "': " << e.what() << '\n';
    return kExitUsage;
  }

  out << "bin_lo,bin_hi,count,group\n";
  for (const auto& h : modes.front().histograms) {
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << fmt(h.bin_edges[b]) << ',' << fmt(h.bin_edges[b + 1]) << ',' << h.counts[b] << ',' << h.group << '\n';
    }
  }
  for (const auto& mode : modes) {
    for (const auto& h : mode.histograms) {
      out << "# summary group=" << h.group << " mode=" << (mode.centered ? "centered" : "uncentered")
          << " filters=" << h.total() + h.degenerate << " analyzed=" << h.total() << " degenerate=" << h.degenerate
          << " mean_pc1=" << fmt(h.mean_ratio(), 8) << " median_pc1=" << fmt(h.median_ratio(), 8) << '\n';
    }
  }
  return kExitOk;
}

// ---- complexity -----------------------------------------------------------

namespace {

using nlohmann::json;

std::size_t get_count(const json& obj, const std::string& key, const std::string& path, bool required,
                      std::size_t fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw SpecError(path + "." + key, "missing");
    return fallback;
  }
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw SpecError(path + "." + key, "expected a non-negative integer");
  }
  return it->get<std::size_t>();
}

LayerSpec parse_layer(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw SpecError(path, "expected an object");
  static const std::vector<std::string> kKnown{"kind", "in_channels", "out_channels", "kernel", "stride",
                                               "padding", "p"};
  for (const auto& [key, value] : obj.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw SpecError(path + "." + key, "unknown field");
    }
  }
  const auto kind_it = obj.find("kind");
  if (kind_it == obj.end()) throw SpecError(path + ".kind", "missing");
  if (!kind_it->is_string()) throw SpecError(path + ".kind", "expected a string");
  const auto kind = parse_layer_kind(kind_it->get<std::string>());
  if (!kind) throw SpecError(path + ".kind", "unknown layer kind '" + kind_it->get<std::string>() + "'");

  LayerSpec spec;
  spec.kind = *kind;
  const bool channels = *kind != LayerKind::kRelu && *kind != LayerKind::kGlobalAvgPool;
  spec.in_channels = get_count(obj, "in_channels", path, channels, 0);
  spec.out_channels = get_count(obj, "out_channels", path, channels && *kind != LayerKind::kDepthwise,
                                *kind == LayerKind::kDepthwise ? spec.in_channels : 0);
  spec.kernel = get_count(obj, "kernel", path, false, 1);
  spec.stride = get_count(obj, "stride", path, false, 1);
  if (obj.contains("padding")) spec.padding = get_count(obj, "padding", path, true, 0);
  if (const auto it = obj.find("p"); it != obj.end()) {
    if (!it->is_number()) throw SpecError(path + ".p", "expected a number");
    spec.p = it->get<double>();
  }
  try {
    spec.validate();
  } catch (const SpecError& e) {
    throw SpecError(path + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
  return spec;
}

struct Variant {
  const char* name;
  LayerKind kind;
};

constexpr Variant kVariants[] = {{"standard", LayerKind::kStandardConv},
                                 {"dsc", LayerKind::kDsc},
                                 {"bsconv_u", LayerKind::kBsconvU},
                                 {"bsconv_s", LayerKind::kBsconvS}};

}  // namespace

ModelDescription parse_model_description(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError("$", std::string("JSON parse error at byte ") + std::to_string(e.byte));
  }
  ModelDescription desc;
  const json* layers = &doc;
  std::string prefix = "layers";
  if (doc.is_object()) {
    for (const auto& [key, value] : doc.items()) {
      if (key != "input" && key != "layers") throw SpecError(key, "unknown field");
    }
    if (!doc.contains("layers")) throw SpecError("layers", "missing");
    layers = &doc["layers"];
    if (doc.contains("input")) {
      const json& in = doc["input"];
      if (!in.is_array() || in.size() != 3) throw SpecError("input", "expected [channels, height, width]");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!in[i].is_number_integer() || in[i].get<std::int64_t>() < 1) {
          throw SpecError("input[" + std::to_string(i) + "]", "expected a positive integer");
        }
        desc.input_shape.push_back(in[i].get<std::size_t>());
      }
    }
  } else if (!doc.is_array()) {
    throw SpecError("$", "expected a layer array or an object with \"layers\"");
  }
  if (!layers->is_array()) throw SpecError(prefix, "expected an array");
  for (std::size_t i = 0; i < layers->size(); ++i) {
    desc.layers.push_back(parse_layer((*layers)[i], prefix + "[" + std::to_string(i) + "]"));
  }
  if (desc.input_shape.empty()) {
    desc.input_shape = desc.layers.empty() ? Shape{1, 1, 1} : Shape{std::max<std::size_t>(1, desc.layers[0].in_channels), 32, 32};
  }
  return desc;
}

int cmd_complexity(const GlobalOptions& global, const ComplexityOptions& options, std::ostream& out,
                   std::ostream& err) {
  if (!apply_globals(global, err)) return kExitUsage;
  if (!(options.p > 0.0 && options.p <= 1.0)) {
    err << "error: --p must be in (0, 1]\n";
    return kExitUsage;
  }
  std::ifstream in(options.model);
  if (!in) {
    err << "error: cannot read '" << options.model.string() << "'\n";
    return kExitUsage;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  ModelDescription desc;
  std::vector<LayerCost> costs;
  try {
    desc = parse_model_description(buf.str());
    costs = model_costs(desc.layers, desc.input_shape);
  } catch (const SpecError& e) {
    err << "error: " << options.model.string() << ": " << e.what() << '\n';
    return kExitUsage;
  }

  const std::uint64_t scale = options.flops ? 2 : 1;
  const std::string unit = options.flops ? "flops" : "macs";
  out << "# complexity " << global_text(global) << " model=" << options.model.string() << " input="
      << shape_text(desc.input_shape) << " p=" << fmt(options.p) << " unit=" << unit << '\n';

  std::vector<std::string> header{"index", "kind", "input_shape", "output_shape", "params", unit};
  for (const auto& v : kVariants) {
    header.push_back(std::string(v.name) + "_params");
    header.push_back(std::string(v.name) + "_" + unit);
  }
  std::vector<std::vector<std::string>> rows;
  std::uint64_t total_p = 0, total_m = 0;
  std::vector<std::uint64_t> variant_totals(2 * std::size(kVariants), 0);
  for (std::size_t i = 0; i < costs.size(); ++i) {
    const LayerCost& c = costs[i];
    std::vector<std::string> row{std::to_string(i), std::string(layer_kind_name(c.spec.kind)),
                                 shape_text(c.input_shape), shape_text(c.output_shape), std::to_string(c.params),
                                 std::to_string(c.macs * scale)};
    total_p += c.params;
    total_m += c.macs;
    for (std::size_t v = 0; v < std::size(kVariants); ++v) {
      std::uint64_t vp = c.params, vm = c.macs;
      if (is_conv_block(c.spec.kind)) {
        LayerSpec alt = c.spec;
        alt.kind = kVariants[v].kind;
        if (alt.kind == LayerKind::kBsconvS) alt.p = options.p;
        vp = count_params(alt);
        vm = count_macs(alt, c.input_shape);
        row.push_back(std::to_string(vp));
        row.push_back(std::to_string(vm * scale));
      } else {
        row.push_back("-");
        row.push_back("-");
      }
      variant_totals[2 * v] += vp;
      variant_totals[2 * v + 1] += vm;
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::string> total{"total", "", "", "", std::to_string(total_p), std::to_string(total_m * scale)};
  for (std::size_t v = 0; v < variant_totals.size(); ++v) {
    total.push_back(std::to_string(variant_totals[v] * (v % 2 ? scale : 1)));
  }
  rows.push_back(std::move(total));

  if (options.csv) {
    const auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return kExitOk;
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      // Names left-aligned, numbers right-aligned.
      if (i < 4) {
        out << std::left << std::setw(static_cast<int>(width[i])) << cells[i];
      } else {
        out << std::right << std::setw(static_cast<int>(width[i])) << cells[i];
      }
      out << (i + 1 < cells.size() ? "  " : "\n");
    }
  };
  line(header);
  for (const auto& r : rows) line(r);
  out << std::right;
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

std::optional<LayerKind> parse_block_kind(const std::string& name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "standard" || n == "standard_conv") return LayerKind::kStandardConv;
  if (n == "dsc") return LayerKind::kDsc;
  if (n == "bsconv_u") return LayerKind::kBsconvU;
  if (n == "bsconv_s") return LayerKind::kBsconvS;
  return std::nullopt;
}

namespace {

// Every parameter as "layer<i>.<param>", plus "layer<i>.materialized"
// holding the equivalent [N,M,K,K] kernel of each conv block.
WeightFile export_weights(const Model<float>& model) {
  WeightFile wf;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const Layer<float>& layer = model.layers()[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    for (const auto& p : layer.params) wf.add(prefix + p.name, p.value);
    switch (layer.spec.kind) {
      case LayerKind::kStandardConv:
        wf.add(prefix + "materialized", layer.param("kernel").value);
        break;
      case LayerKind::kDsc:
        wf.add(prefix + "materialized",
               cross_kernel_materialize(layer.param("pointwise").value, layer.param("depthwise").value));
        break;
      case LayerKind::kBsconvU:
        wf.add(prefix + "materialized",
               materialize_u(BsconvUParams<float>{layer.param("blueprints").value, layer.param("weights").value}));
        break;
      case LayerKind::kBsconvS:
        wf.add(prefix + "materialized",
               materialize_s(BsconvSParams<float>{layer.param("blueprints").value, layer.param("weights_a").value,
                                                  layer.param("weights_b").value, layer.spec.p}));
        break;
      default:
        break;
    }
  }
  return wf;
}

}  // namespace

int cmd_train(const GlobalOptions& global, const TrainOptions& options, std::ostream& out, std::ostream& err) {
  if (!apply_globals(global, err)) return kExitUsage;
  if (options.dataset != "toy") {
    err << "error: unknown --dataset '" << options.dataset << "' (only 'toy' is available)\n";
    return kExitUsage;
  }
  if (global.dtype != DType::kFloat32) {
    err << "error: train runs in f32 only\n";
    return kExitUsage;
  }
  if (options.schedule != "step" && options.schedule != "linear") {
    err << "error: --schedule must be 'step' or 'linear'\n";
    return kExitUsage;
  }

  TrainConfig config;
  config.lr0 = options.lr;
  config.momentum = options.momentum;
  config.weight_decay = options.weight_decay;
  config.alpha = options.alpha;
  config.epochs = options.epochs;
  config.batch_size = options.batch_size;
  config.seed = global.seed;
  // Milestones at 1/2, 22/30 and 27/30 of the run.
  const std::size_t e = options.epochs;
  config.schedule = options.schedule == "linear" ? LrSchedule::linear(std::max<std::size_t>(1, e))
                                                 : LrSchedule::step({e / 2, e * 22 / 30, e * 27 / 30});

  std::optional<Model<float>> model;
  std::optional<ToyDataset> data;
  try {
    config.validate();
    if (!(options.p > 0.0 && options.p <= 1.0)) throw std::invalid_argument("--p must be in (0, 1]");
    if (options.width < 1) throw std::invalid_argument("--width must be >= 1");
    const auto body = toy_body(options.block, options.width, options.p);
    data = make_toy_dataset(options.classes, options.per_class, options.size, global.seed);
    model = Model<float>::build(body, {3, options.size, options.size}, options.classes, global.seed);
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }

  out << "# train " << global_text(global) << " dataset=toy block=" << layer_kind_name(options.block)
      << " alpha=" << fmt(options.alpha) << " p=" << fmt(options.p) << " epochs=" << options.epochs
      << " batch=" << options.batch_size << " lr=" << fmt(options.lr) << " schedule=" << options.schedule
      << " momentum=" << fmt(options.momentum) << " weight_decay=" << fmt(options.weight_decay)
      << " classes=" << options.classes << " per_class=" << options.per_class << " size=" << options.size
      << " width=" << options.width << " params=" << model->parameter_count() << '\n';

  std::error_code ec;
  std::filesystem::create_directories(global.out_dir, ec);
  const auto metrics_path = global.out_dir / "metrics.csv";
  const auto weights_path = global.out_dir / "weights.bswt";
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) {
    err << "error: cannot write '" << metrics_path.string() << "'\n";
    return kExitUsage;
  }
  write_metrics_header(metrics);

  std::size_t epoch = 0;
  std::vector<EpochMetrics> history;
  try {
    history = train(*model, *data, config, [&](const EpochMetrics& m) {
      write_metrics_row(metrics, m);
      metrics.flush();
      out << "epoch " << m.epoch << " lr=" << fmt(m.lr) << " loss=" << fmt(m.train_loss)
          << " train_acc=" << fmt(m.train_acc, 4) << " test_acc=" << fmt(m.test_acc, 4)
          << " ortho=" << sci(m.ortho_residual) << '\n';
      epoch = m.epoch + 1;
    });
  } catch (const NonFiniteLossError& ex) {
    err << "error: non-finite loss in epoch " << epoch << ": " << ex.what() << '\n';
    return kExitFailure;
  }

  try {
    export_weights(*model).save(weights_path);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
  if (!history.empty()) {
    out << "final train_acc=" << fmt(history.back().train_acc, 4) << " test_acc=" << fmt(history.back().test_acc, 4)
        << '\n';
  }
  out << "wrote " << metrics_path.string() << " and " << weights_path.string() << '\n';
  return kExitOk;
}

// ---- bench ----------------------------------------------------------------

std::optional<std::vector<BenchSize>> parse_bench_sizes(const std::string& text) {
  std::vector<BenchSize> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    std::size_t v[4];
    std::stringstream is(item);
    std::string field;
    std::size_t count = 0;
    while (std::getline(is, field, ',')) {
      if (count == 4 || field.empty() || field.find_first_not_of("0123456789") != std::string::npos) {
        return std::nullopt;
      }
      v[count++] = std::stoul(field);
    }
    if (count != 4 || v[0] < 1 || v[1] < 1 || v[2] < 1 || v[2] % 2 == 0 || v[3] < 1) return std::nullopt;
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  if (out.empty()) return std::nullopt;
  return out;
}

namespace {

template <typename F>
double median_ms(std::size_t repeats, F&& body) {
  std::vector<double> t;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    body();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t.size() % 2 ? t[t.size() / 2] : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
}

template <Scalar T>
void bench_size(const BenchSize& sz, const BenchOptions& options, std::uint64_t seed, std::ostream& out) {
  Rng rng(seed);
  const std::size_t m = sz.in_channels, n = sz.out_channels, k = sz.kernel;
  const ConvGeometry geom = ConvGeometry::same(k);
  const Tensor<T> input = Tensor<T>::random_normal({m, sz.spatial, sz.spatial}, rng.next(), T(1));
  const Tensor<T> kernels = Tensor<T>::random_normal({n, m, k, k}, rng.next(), T(1));
  const Tensor<T> dw = Tensor<T>::random_normal({m, k, k}, rng.next(), T(1));
  const Tensor<T> pw = Tensor<T>::random_normal({n, m}, rng.next(), T(1));
  const auto pu = BsconvUParams<T>::init(m, n, k, rng.next());
  const auto ps = BsconvSParams<T>::init(m, n, k, options.p, rng.next());

  const Shape shape{m, sz.spatial, sz.spatial};
  const auto macs = [&](LayerKind kind) {
    return count_macs(LayerSpec{.kind = kind, .in_channels = m, .out_channels = n, .kernel = k, .p = options.p}, shape);
  };
  struct Row {
    const char* kind;
    double ms;
    std::uint64_t macs;
  };
  std::vector<Row> rows{
      {"standard_conv", median_ms(options.repeats, [&] { (void)conv2d_standard(input, kernels, geom); }),
       macs(LayerKind::kStandardConv)},
      {"dsc", median_ms(options.repeats, [&] { (void)dsc_block(input, dw, pw, geom); }), macs(LayerKind::kDsc)},
      {"bsconv_u", median_ms(options.repeats, [&] { (void)bsconv_u_forward(input, pu, geom); }),
       macs(LayerKind::kBsconvU)},
      {"bsconv_s", median_ms(options.repeats, [&] { (void)bsconv_s_forward(input, ps, geom); }),
       macs(LayerKind::kBsconvS)},
  };
  const Row& base = rows.front();
  for (const auto& r : rows) {
    out << std::left << std::setw(18) << (std::to_string(m) + "," + std::to_string(n) + "," + std::to_string(k) + "," +
                                          std::to_string(sz.spatial))
        << std::setw(15) << r.kind << std::right << std::setw(12) << fmt(r.ms, 5) << std::setw(14) << r.macs
        << std::setw(12) << fmt(r.ms / base.ms, 4) << std::setw(12)
        << fmt(static_cast<double>(r.macs) / static_cast<double>(base.macs), 6) << '\n';
  }
}

}  // namespace

int cmd_bench(const GlobalOptions& global, const BenchOptions& options, std::ostream& out, std::ostream& err) {
  if (!apply_globals(global, err)) return kExitUsage;
  if (options.repeats < 1) {
    err << "error: --repeats must be >= 1\n";
    return kExitUsage;
  }
  if (options.sizes.empty()) {
    err << "error: --sizes is empty\n";
    return kExitUsage;
  }
  out << "# bench " << global_text(global) << " repeats=" << options.repeats << " p=" << fmt(options.p) << '\n';
  out << std::left << std::setw(18) << "M,N,K,S" << std::setw(15) << "kind" << std::right << std::setw(12)
      << "median_ms" << std::setw(14) << "macs" << std::setw(12) << "time_ratio" << std::setw(12) << "mac_ratio"
      << '\n';
  for (const auto& sz : options.sizes) {
    if (global.dtype == DType::kFloat32) {
      bench_size<float>(sz, options, global.seed, out);
    } else {
      bench_size<double>(sz, options, global.seed, out);
    }
  }
  return kExitOk;
}

template EquivalenceReport run_equivalence_suite<float>(std::size_t, std::size_t, std::size_t, std::uint64_t);
template EquivalenceReport run_equivalence_suite<double>(std::size_t, std::size_t, std::size_t, std::uint64_t);

}  // namespace bsconv
