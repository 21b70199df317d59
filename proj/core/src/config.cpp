#include "hdiff/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace hdiff {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error("config: bad value for " + std::string(key) + ": '" + std::string(value) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad_value(key, v);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v);
}

std::vector<int> parse_int_list(std::string_view key, std::string_view v) {
  std::vector<int> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_number<int>(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v);
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(TrainConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const TrainConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

template <typename T>
Key num(T TrainConfig::*m) {
  return {[m](TrainConfig& c, std::string_view k, std::string_view v) { c.*m = parse_number<T>(k, v); },
          [m](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*m);
            } else {
              return std::to_string(c.*m);
            }
          }};
}

Key str(std::string TrainConfig::*m) {
  return {[m](TrainConfig& c, std::string_view, std::string_view v) { c.*m = std::string(v); },
          [m](const TrainConfig& c) { return c.*m; }};
}

const std::map<std::string, Key, std::less<>>& keys() {
  static const std::map<std::string, Key, std::less<>> k = {
      {"dataset", str(&TrainConfig::dataset)},
      {"data_count", num(&TrainConfig::data_count)},
      {"resolution", num(&TrainConfig::resolution)},
      {"channels", num(&TrainConfig::channels)},
      {"batch_size", num(&TrainConfig::batch_size)},
      {"steps", num(&TrainConfig::steps)},
      {"rate", num(&TrainConfig::subsample_rate)},
      {"lr", num(&TrainConfig::lr)},
      {"seed", num(&TrainConfig::seed)},
      {"threads", num(&TrainConfig::threads)},
      {"diffusion_steps", num(&TrainConfig::diffusion_steps)},
      {"schedule", str(&TrainConfig::schedule)},
      {"cosine_s", num(&TrainConfig::cosine_s)},
      {"max_beta", num(&TrainConfig::max_beta)},
      {"sigma2",
       {[](TrainConfig& c, std::string_view k, std::string_view v) {
          if (v == "beta") {
            c.sigma2 = Sigma2Choice::Beta;
          } else if (v == "beta_tilde") {
            c.sigma2 = Sigma2Choice::BetaTilde;
          } else {
            bad_value(k, v);
          }
        },
        [](const TrainConfig& c) { return std::string(c.sigma2 == Sigma2Choice::Beta ? "beta" : "beta_tilde"); }}},
      {"param_mode",
       {[](TrainConfig& c, std::string_view, std::string_view v) { c.param_mode = parse_param_mode(v); },
        [](const TrainConfig& c) { return std::string(to_string(c.param_mode)); }}},
      {"blur_variance", num(&TrainConfig::blur_variance)},
      {"wiener_eps", num(&TrainConfig::wiener_eps)},
      {"width", num(&TrainConfig::width)},
      {"kernel_size", num(&TrainConfig::kernel_size)},
      {"inner_res", num(&TrainConfig::inner_res)},
      {"sparse_blocks", num(&TrainConfig::sparse_blocks)},
      {"channel_mults",
       {[](TrainConfig& c, std::string_view k, std::string_view v) { c.channel_mults = parse_int_list(k, v); },
        [](const TrainConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.channel_mults.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(c.channel_mults[i]);
          }
          return s;
        }}},
      {"time_dim", num(&TrainConfig::time_dim)},
      {"knn", num(&TrainConfig::knn)},
      {"sampler", str(&TrainConfig::sampler)},
      {"sample_steps", num(&TrainConfig::sample_steps)},
      {"guidance_lambda", num(&TrainConfig::guidance_lambda)},
      {"t_start", num(&TrainConfig::t_start)},
      {"jacobian_free",
       {[](TrainConfig& c, std::string_view k, std::string_view v) { c.jacobian_free = parse_bool(k, v); },
        [](const TrainConfig& c) { return std::string(c.jacobian_free ? "true" : "false"); }}},
      {"checkpoint", str(&TrainConfig::checkpoint)},
      {"metrics", str(&TrainConfig::metrics)},
      {"checkpoint_every", num(&TrainConfig::checkpoint_every)},
  };
  return k;
}

}  // namespace

ParamMode parse_param_mode(std::string_view s) {
  if (s == "noisepred") return ParamMode::NoisePred;
  if (s == "x0pred") return ParamMode::X0Pred;
  throw Error("unknown param mode '" + std::string(s) + "' (expected noisepred or x0pred)");
}

std::string_view to_string(ParamMode m) { return m == ParamMode::NoisePred ? "noisepred" : "x0pred"; }

DenoiserConfig TrainConfig::model() const {
  DenoiserConfig d;
  d.channels = channels;
  d.width = width;
  d.kernel_size = kernel_size;
  d.train_res = resolution;
  d.inner_res = inner_res;
  d.sparse_blocks = sparse_blocks;
  d.channel_mults = channel_mults;
  d.time_dim = time_dim;
  d.knn = knn;
  d.seed = mix_seed(seed, 0xDE7015E);
  return d;
}

NoiseSchedule TrainConfig::noise_schedule() const {
  if (schedule != "cosine") throw Error("config: unsupported schedule '" + schedule + "'");
  return NoiseSchedule::cosine(diffusion_steps, cosine_s, max_beta, sigma2);
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw Error("config: " + msg);
  };
  require(batch_size >= 1, "batch_size must be >= 1");
  require(steps >= 0, "steps must be >= 0");
  require(subsample_rate >= 1.0, "rate must be >= 1");
  require(lr > 0.0, "lr must be positive");
  require(diffusion_steps >= 1, "diffusion_steps must be >= 1");
  require(resolution >= 1 && channels >= 1 && data_count >= 1, "resolution, channels and data_count must be >= 1");
  require(blur_variance > 0.0, "blur_variance must be positive");
  require(wiener_eps > 0.0, "wiener_eps must be positive");
  require(sampler == "ddim" || sampler == "ancestral", "sampler must be ddim or ancestral");
  require(sample_steps >= 1 && sample_steps <= diffusion_steps, "sample_steps must be in [1, diffusion_steps]");
  require(guidance_lambda >= 0.0, "guidance_lambda must be >= 0");
  require(t_start >= 0 && t_start <= diffusion_steps, "t_start must be in [0, diffusion_steps]");
  require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
  require(schedule == "cosine", "schedule must be cosine");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [name, key] : keys()) out += name + " = " + key.get(*this) + "\n";
  return out;
}

void config_set(TrainConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = keys().find(key);
  if (it == keys().end()) throw Error("config: unknown key: " + std::string(key));
  it->second.set(cfg, key, trim(value));
}

TrainConfig config_parse(std::string_view text, std::vector<std::string>* warnings) {
  TrainConfig cfg;
  std::vector<std::string> unknown;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config: line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!keys().count(key)) {
      unknown.emplace_back(key);
      continue;
    }
    if (!seen.insert(std::string(key)).second && warnings) {
      warnings->push_back("config: duplicate key '" + std::string(key) + "' on line " + std::to_string(line_no) +
                          ", last value wins");
    }
    config_set(cfg, key, value);
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw Error(msg);
  }
  return cfg;
}

TrainConfig config_load(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return config_parse(ss.str(), warnings);
}

}  // namespace hdiff
