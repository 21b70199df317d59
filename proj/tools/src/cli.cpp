#include "hdiff/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hdiff/config.hpp"
#include "hdiff/dataset.hpp"
#include "hdiff/eval.hpp"
#include "hdiff/field_io.hpp"
#include "hdiff/grad/checkpoint.hpp"
#include "hdiff/grad/gradcheck.hpp"
#include "hdiff/grad/ops.hpp"
#include "hdiff/oracles/suite.hpp"
#include "hdiff/rng.hpp"
#include "hdiff/tasks.hpp"
#include "hdiff/trainer.hpp"

namespace hdiff::cli {
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> rate;
  std::optional<int> steps;
  std::optional<int> res;
  std::string ckpt;
  std::string out;
  std::optional<std::string> sampler;
  std::optional<double> lambda;
  std::optional<int> t_start;
  std::optional<std::string> param_mode;
  std::optional<int> threads;
  std::string input;
  std::string mask;
  int samples = 16;
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Field read_field(const std::string& path) { return ends_with(path, ".png") ? read_png(path) : read_idf1(path); }

/// Writes <stem>.png (2D grids with 1 or 3 channels), <stem>.idf1 and, if
/// given, <stem>.raw.idf1 for the mollified estimate.
void write_outputs(const std::string& out, const Field& field, const Field* raw) {
  fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path stem = p.parent_path() / p.stem();
  if (field.grid && field.grid->rank() == 2 && (field.channels() == 1 || field.channels() == 3)) {
    write_png(stem.string() + ".png", field);
  }
  write_idf1(stem.string() + ".idf1", field);
  if (raw) write_idf1(stem.string() + ".raw.idf1", *raw);
}

class Context {
 public:
  Context(const Flags& f, std::ostream& out, std::ostream& err) : f_(f), out_(out), err_(err) {}

  TrainConfig config() const {
    std::vector<std::string> warnings;
    TrainConfig cfg = f_.config.empty() ? TrainConfig{} : config_load(f_.config, &warnings);
    for (const auto& w : warnings) err_ << "warning: " << w << '\n';
    apply_overrides(cfg);
    return cfg;
  }

  void apply_overrides(TrainConfig& cfg) const {
    if (f_.seed) cfg.seed = *f_.seed;
    if (f_.rate) cfg.subsample_rate = *f_.rate;
    if (f_.param_mode) cfg.param_mode = parse_param_mode(*f_.param_mode);
    if (f_.threads) cfg.threads = *f_.threads;
    if (f_.sampler) cfg.sampler = *f_.sampler;
    if (f_.lambda) cfg.guidance_lambda = *f_.lambda;
    if (f_.t_start) cfg.t_start = *f_.t_start;
  }

  int gen_data() const {
    TrainConfig cfg = config();
    if (f_.res) cfg.resolution = *f_.res;
    const std::string dir = f_.out.empty() ? "data" : f_.out;
    write_dataset(dir, generate_toy(cfg.dataset, cfg.data_count, cfg.resolution, cfg.channels, cfg.seed));
    out_ << "wrote " << cfg.data_count << " fields to " << dir << '\n';
    return 0;
  }

  int train() const {
    TrainConfig cfg = config();
    if (f_.steps) cfg.steps = *f_.steps;
    if (!f_.ckpt.empty()) cfg.checkpoint = f_.ckpt;
    if (!f_.out.empty()) cfg.metrics = f_.out;
    cfg.validate();
    train_loop(cfg, [&](const StepStats& s) {
      if (s.step % 100 == 0) err_ << "step " << s.step << " loss " << s.loss << " (" << s.wall_ms << " ms)\n";
    });
    out_ << "checkpoint " << cfg.checkpoint << ", metrics " << cfg.metrics << '\n';
    return 0;
  }

  struct Loaded {
    LoadedModel lm;
    DiffusionModel model;
  };

  Loaded load() const {
    if (f_.ckpt.empty()) throw CLI::RequiredError("--ckpt");
    LoadedModel lm = load_model(f_.ckpt);
    apply_overrides(lm.config);
    DiffusionModel m = DiffusionModel::from(*lm.model, lm.config);
    return {std::move(lm), std::move(m)};
  }

  SampleOptions sample_options(const TrainConfig& cfg) const {
    SampleOptions o;
    o.sampler = parse_sampler(cfg.sampler);
    o.steps = f_.steps ? *f_.steps : cfg.sample_steps;
    o.seed = cfg.seed;
    return o;
  }

  int sample() const {
    const Loaded l = load();
    const int res = f_.res ? *f_.res : l.lm.config.resolution;
    const SampleResult r = hdiff::sample(l.model, RegularGrid::square(res), sample_options(l.lm.config));
    write_outputs(out_path("sample.png"), r.demollified, &r.raw);
    return 0;
  }

  int superres() const {
    const Loaded l = load();
    const Field input = read_field(required_input());
    const int res = f_.res ? *f_.res : 2 * input.grid.value_or(RegularGrid::square(1)).dims[0];
    const int t_start = f_.t_start ? *f_.t_start : l.lm.config.diffusion_steps / 4;
    const SampleResult r =
        super_resolve(l.model, input, RegularGrid::square(res), t_start, sample_options(l.lm.config));
    write_outputs(out_path("superres.png"), r.demollified, &r.raw);
    return 0;
  }

  int inpaint() const {
    const Loaded l = load();
    const Field observed = read_field(required_input());
    if (!observed.grid) throw Error("inpaint: input must be a full grid");
    Mat mask;
    if (f_.mask.empty()) {
      mask = centre_hole(*observed.grid);
    } else {
      const Field m = read_field(f_.mask);
      if (m.size() != observed.size()) throw Error("inpaint: mask size does not match the input");
      mask = (m.values.col(0).array() > 0.0).cast<double>().matrix();
    }
    InpaintOptions o;
    o.lambda = l.lm.config.guidance_lambda;
    o.t_start = l.lm.config.t_start;
    o.jacobian_free = l.lm.config.jacobian_free;
    o.sampling = sample_options(l.lm.config);
    const SampleResult r = hdiff::inpaint(l.model, observed, mask, o);
    write_outputs(out_path("inpaint.png"), r.demollified, &r.raw);
    return 0;
  }

  int eval() const {
    const Loaded l = load();
    const TrainConfig& cfg = l.lm.config;
    const fs::path dir = f_.out.empty() ? fs::path("eval") : fs::path(f_.out);
    fs::create_directories(dir);
    // Held-out data: a seed stream disjoint from the training set.
    const std::vector<Field> held =
        generate_toy(cfg.dataset == "stripes" ? "stripes" : "gaussian_bumps", std::max(f_.samples, 2),
                     cfg.resolution, cfg.channels, mix_seed(cfg.seed, 0x4E1D));
    const std::vector<int> ts{1, cfg.diffusion_steps / 10, cfg.diffusion_steps / 2, cfg.diffusion_steps};
    {
      std::ofstream os(dir / "denoise.csv");
      write_denoise_csv(os, denoise_mse_curve(*l.lm.model, cfg, held, ts, f_.samples, cfg.seed));
      if (!os) throw Error("write failed: " + (dir / "denoise.csv").string());
    }
    const SampleOptions so = sample_options(cfg);
    const std::vector<int> resolutions{cfg.resolution, f_.res ? *f_.res : 2 * cfg.resolution};
    const auto rows = discretisation_report(l.model, resolutions, std::max(f_.samples, 2), so);
    {
      std::ofstream os(dir / "resolution.csv");
      write_resolution_csv(os, rows);
      if (!os) throw Error("write failed: " + (dir / "resolution.csv").string());
    }
    {
      // Raw samples estimate T x0, so they are compared with mollified held-out data.
      const Mollifier moll = l.model.mollifier(RegularGrid::square(cfg.resolution));
      std::vector<Field> samples, target;
      for (int i = 0; i < std::max(f_.samples, 2); ++i) {
        SampleOptions o = so;
        o.seed = mix_seed(so.seed, static_cast<std::uint64_t>(i));
        samples.push_back(hdiff::sample(l.model, RegularGrid::square(cfg.resolution), o).raw);
      }
      for (const Field& f : held) target.push_back(moll.mollify(f));
      const std::size_t half = target.size() / 2;
      const std::vector<Field> a(target.begin(), target.begin() + static_cast<std::ptrdiff_t>(half));
      const std::vector<Field> b(target.begin() + static_cast<std::ptrdiff_t>(half), target.end());
      MmdOptions mo;
      mo.bandwidth = median_pairwise_distance(a, b);
      mo.unbiased = false;
      std::ofstream os(dir / "mmd.csv");
      os << "comparison,mmd\n";
      os << "null_halves," << mmd(a, b, mo) << '\n';
      os << "samples_vs_heldout," << mmd(samples, b, mo) << '\n';
      if (!os) throw Error("write failed: " + (dir / "mmd.csv").string());
    }
    out_ << "wrote reports to " << dir.string() << '\n';
    return 0;
  }

  int bench() const {
    TrainConfig cfg = config();
    const int reps = f_.steps ? *f_.steps : 5;
    const auto rows = rate_bench(cfg, {1, 2, 4, 8, 16}, reps);
    if (f_.out.empty()) {
      write_rate_csv(out_, rows);
    } else {
      std::ofstream os(f_.out);
      write_rate_csv(os, rows);
      if (!os) throw Error("write failed: " + f_.out);
    }
    return 0;
  }

  int gradcheck() const {
    TrainConfig cfg = f_.ckpt.empty() ? config() : load_model(f_.ckpt).config;
    apply_overrides(cfg);
    DenoiserConfig dc = cfg.model();
    dc.zero_init = false;
    Denoiser net(dc);
    if (!f_.ckpt.empty()) grad::load_params(net.params(), grad::read_checkpoint(f_.ckpt));
    const int res = f_.res ? *f_.res : 8;
    const RegularGrid g = RegularGrid::square(res);
    const Geometry geom = net.prepare(grid_coords(g), g);
    Rng rng(mix_seed(cfg.seed, 0x6C));
    Mat x(static_cast<Eigen::Index>(g.size()), cfg.channels);
    Mat proj(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = rng.normal();
      proj.data()[i] = rng.normal();
    }
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.diffusion_steps)));
    grad::GradCheckOptions o;
    o.seed = cfg.seed;
    const grad::GradCheckReport rep = grad::grad_check(
        net.params(),
        [&](grad::Tape& tape) { return grad::sum(grad::mul(net.forward(tape, geom, tape.constant(x), t), tape.constant(proj))); },
        o);
    std::ostream* os = &out_;
    std::ofstream file;
    if (!f_.out.empty()) {
      file.open(f_.out);
      if (!file) throw Error("cannot open for writing: " + f_.out);
      os = &file;
    }
    *os << "group,index,analytic,numeric,rel_err\n";
    os->precision(10);
    for (const auto& e : rep.entries) {
      *os << e.group << ',' << e.index << ',' << e.analytic << ',' << e.numeric << ',' << e.rel_err << '\n';
    }
    out_ << "gradcheck: " << rep.entries.size() << " entries over " << rep.groups << " groups, max rel err "
         << rep.max_rel_err << (rep.passed ? " PASS" : " FAIL") << '\n';
    return rep.passed ? 0 : 1;
  }

  int oracle_suite() const {
    const auto results = oracle::run_suite(oracle::all_checks(f_.seed.value_or(0)));
    if (f_.out.empty()) {
      oracle::write_table(out_, results);
    } else {
      std::ofstream os(f_.out);
      oracle::write_table(os, results);
      if (!os) throw Error("write failed: " + f_.out);
    }
    const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
    out_ << "oracle-suite: " << results.size() - static_cast<std::size_t>(failed) << "/" << results.size()
         << " passed\n";
    return failed == 0 ? 0 : 1;
  }

 private:
  std::string out_path(const std::string& fallback) const { return f_.out.empty() ? fallback : f_.out; }

  const std::string& required_input() const {
    if (f_.input.empty()) throw CLI::RequiredError("--input");
    return f_.input;
  }

  static Mat centre_hole(const RegularGrid& g) {
    const Mat c = grid_coords(g);
    Mat m(c.rows(), 1);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      const bool hole = (c.row(i).array() > 0.25).all() && (c.row(i).array() < 0.75).all();
      m(i, 0) = hole ? 0.0 : 1.0;
    }
    return m;
  }

  const Flags& f_;
  std::ostream& out_;
  std::ostream& err_;
};

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mollified function-space diffusion on scattered coordinates", "hilbert_diff"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Base seed");
    sub->add_option("--threads", f.threads, "Worker threads (capped by HILBERT_DIFF_THREADS)");
    sub->add_option("--out", f.out, "Output path");
  };
  auto model_flags = [&](CLI::App* sub) {
    sub->add_option("--ckpt", f.ckpt, "Checkpoint path")->required();
    sub->add_option("--steps", f.steps, "Reverse steps");
    sub->add_option("--sampler", f.sampler, "ddim or ancestral");
    sub->add_option("--res", f.res, "Output resolution");
    sub->add_option("--param-mode", f.param_mode, "noisepred or x0pred");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a toy dataset as IDF1 files");
  common(gen);
  gen->add_option("--res", f.res, "Resolution");
  gen->get_option("--config")->required();

  auto* train = app.add_subcommand("train", "Train on subsampled coordinates");
  common(train);
  train->get_option("--config")->required();
  train->add_option("--rate", f.rate, "Subsampling rate");
  train->add_option("--steps", f.steps, "Optimizer steps");
  train->add_option("--ckpt", f.ckpt, "Checkpoint output path");
  train->add_option("--param-mode", f.param_mode, "noisepred or x0pred");

  auto* sample = app.add_subcommand("sample", "Sample at any resolution");
  common(sample);
  model_flags(sample);

  auto* superres = app.add_subcommand("superres", "Super-resolve a grid field");
  common(superres);
  model_flags(superres);
  superres->add_option("--input", f.input, "Low-resolution input (IDF1 or PNG)")->required();
  superres->add_option("--t-start", f.t_start, "Diffusion time to noise the input to");

  auto* inpaint = app.add_subcommand("inpaint", "Inpaint with reconstruction guidance");
  common(inpaint);
  model_flags(inpaint);
  inpaint->add_option("--input", f.input, "Observed field (IDF1 or PNG)")->required();
  inpaint->add_option("--mask", f.mask, "Known-pixel mask, nonzero = known (IDF1 or PNG)");
  inpaint->add_option("--lambda", f.lambda, "Guidance strength");
  inpaint->add_option("--t-start", f.t_start, "Start time (0: T)");

  auto* eval = app.add_subcommand("eval", "Denoising, resolution and MMD reports");
  common(eval);
  model_flags(eval);
  eval->add_option("--samples", f.samples, "Samples per report");

  auto* bench = app.add_subcommand("bench", "Train-step time per subsampling rate");
  common(bench);
  bench->get_option("--config")->required();
  bench->add_option("--steps", f.steps, "Timed steps per rate");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the denoiser");
  common(gradcheck);
  gradcheck->add_option("--ckpt", f.ckpt, "Checkpoint (else --config)");
  gradcheck->add_option("--res", f.res, "Input grid resolution");
  gradcheck->add_option("--param-mode", f.param_mode, "noisepred or x0pred");

  auto* oracles = app.add_subcommand("oracle-suite", "Run every brute-force oracle comparison");
  oracles->add_option("--seed", f.seed, "Seed");
  oracles->add_option("--out", f.out, "CSV table path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const Context ctx(f, out, err);
    if (gen->parsed()) return ctx.gen_data();
    if (train->parsed()) return ctx.train();
    if (sample->parsed()) return ctx.sample();
    if (superres->parsed()) return ctx.superres();
    if (inpaint->parsed()) return ctx.inpaint();
    if (eval->parsed()) return ctx.eval();
    if (bench->parsed()) return ctx.bench();
    if (gradcheck->parsed()) return ctx.gradcheck();
    if (oracles->parsed()) return ctx.oracle_suite();
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hdiff::cli
