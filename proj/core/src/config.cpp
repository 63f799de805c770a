#include "laggre/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "laggre/error.hpp"

namespace laggre {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(fmt::format("{}: expected an unsigned integer, got '{}'", key, v));
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(out))
    throw ConfigError(fmt::format("{}: expected a real number, got '{}'", key, v));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: expected true/false, got '{}'", key, v));
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(parse_count(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

using Setter = std::function<void(TrainConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"tau", [](TrainConfig& c, auto k, auto v) { c.tau = parse_real(k, v); }},
      {"D", [](TrainConfig& c, auto k, auto v) { c.D = parse_count(k, v); }},
      {"hidden", [](TrainConfig& c, auto k, auto v) { c.hidden = parse_list(k, v); }},
      {"lambda", [](TrainConfig& c, auto k, auto v) { c.lambda = parse_real(k, v); }},
      {"t", [](TrainConfig& c, auto k, auto v) { c.t = parse_real(k, v); }},
      {"k", [](TrainConfig& c, auto k, auto v) { c.k = parse_count(k, v); }},
      {"H", [](TrainConfig& c, auto k, auto v) { c.H = parse_count(k, v); }},
      {"m", [](TrainConfig& c, auto k, auto v) { c.m = parse_count(k, v); }},
      {"batch_size", [](TrainConfig& c, auto k, auto v) { c.batch_size = parse_count(k, v); }},
      {"epochs", [](TrainConfig& c, auto k, auto v) { c.epochs = parse_count(k, v); }},
      {"warm_start_epochs", [](TrainConfig& c, auto k, auto v) { c.warm_start_epochs = parse_count(k, v); }},
      {"lr", [](TrainConfig& c, auto k, auto v) { c.lr = parse_real(k, v); }},
      {"lr_milestones", [](TrainConfig& c, auto k, auto v) { c.lr_milestones = parse_list(k, v); }},
      {"lr_decay", [](TrainConfig& c, auto k, auto v) { c.lr_decay = parse_real(k, v); }},
      {"momentum", [](TrainConfig& c, auto k, auto v) { c.momentum = parse_real(k, v); }},
      {"recluster_every", [](TrainConfig& c, auto k, auto v) { c.recluster_every = parse_count(k, v); }},
      {"recluster_unit",
       [](TrainConfig& c, auto k, auto v) {
         if (v == "epoch") c.recluster_unit = ReclusterUnit::Epoch;
         else if (v == "step") c.recluster_unit = ReclusterUnit::Step;
         else throw ConfigError(fmt::format("{}: expected epoch or step, got '{}'", k, v));
       }},
      {"background_mode", [](TrainConfig& c, auto, auto v) { c.background_mode = parse_background_mode(v); }},
      {"close_mode", [](TrainConfig& c, auto, auto v) { c.close_mode = parse_close_mode(v); }},
      {"k_prime", [](TrainConfig& c, auto k, auto v) { c.k_prime = parse_count(k, v); }},
      {"background_H", [](TrainConfig& c, auto k, auto v) { c.background_H = parse_count(k, v); }},
      {"background_m", [](TrainConfig& c, auto k, auto v) { c.background_m = parse_count(k, v); }},
      {"seed", [](TrainConfig& c, auto k, auto v) { c.seed = parse_u64(k, v); }},
      {"cluster_source",
       [](TrainConfig& c, auto k, auto v) {
         if (v == "bank") c.cluster_source = ClusterSource::Bank;
         else if (v == "fresh-forward") c.cluster_source = ClusterSource::FreshForward;
         else throw ConfigError(fmt::format("{}: expected bank or fresh-forward, got '{}'", k, v));
       }},
      {"kmeans_max_iters", [](TrainConfig& c, auto k, auto v) { c.kmeans_max_iters = parse_count(k, v); }},
      {"knn_k", [](TrainConfig& c, auto k, auto v) { c.knn_k = parse_count(k, v); }},
      {"val_fraction", [](TrainConfig& c, auto k, auto v) { c.val_fraction = parse_real(k, v); }},
      {"density_local", [](TrainConfig& c, auto k, auto v) { c.density_local = parse_count(k, v); }},
      {"density_low", [](TrainConfig& c, auto k, auto v) { c.density_low = parse_count(k, v); }},
      {"density_high", [](TrainConfig& c, auto k, auto v) { c.density_high = parse_count(k, v); }},
      {"record_wallclock", [](TrainConfig& c, auto k, auto v) { c.record_wallclock = parse_bool(k, v); }},
      {"workers", [](TrainConfig& c, auto k, auto v) { c.workers = static_cast<unsigned>(parse_count(k, v)); }},
  };
  return table;
}

}  // namespace

std::string_view to_string(ClusterSource source) {
  return source == ClusterSource::Bank ? "bank" : "fresh-forward";
}

std::string_view to_string(ReclusterUnit unit) { return unit == ReclusterUnit::Epoch ? "epoch" : "step"; }

TrainConfig TrainConfig::resolve(std::size_t n) const {
  TrainConfig c = *this;
  if (c.k == 0) c.k = std::min(n, std::max<std::size_t>(32, n / 300));
  if (c.m == 0) c.m = std::min(n, std::max<std::size_t>(4, n / 128));
  if (c.background_m == 0 && c.k > 0)
    c.background_m = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(c.background_H * n) / static_cast<double>(c.k))),
        std::min<std::size_t>(2, n), n);
  if (c.knn_k == 0) c.knn_k = std::clamp<std::size_t>(n / 10, 1, 200);
  if (c.density_local == 0) c.density_local = std::clamp<std::size_t>(n / 50, 1, 30);
  if (c.density_low == 0) c.density_low = std::max(c.density_local + 1, n / 10);
  if (c.density_high == 0) c.density_high = std::max(c.density_low + 1, std::min<std::size_t>(4096, n / 3));
  return c;
}

void TrainConfig::validate(std::size_t n) const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("t must lie in [0, 1]");
  if (D < 2) throw ConfigError("D must be at least 2");
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (lr < 0.0) throw ConfigError("lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs > 0 && warm_start_epochs >= epochs) throw ConfigError("warm_start_epochs must be below epochs");
  if (epochs == 0 && warm_start_epochs > 0) throw ConfigError("warm_start_epochs must be below epochs");
  if (k < 1 || k > n) throw ConfigError(fmt::format("k must lie in [1, N={}]", n));
  if (H < 1) throw ConfigError("H must be at least 1");
  if (m < 1 || m > n) throw ConfigError(fmt::format("m must lie in [1, N={}]", n));
  if (recluster_every < 1) throw ConfigError("recluster_every must be at least 1");
  if (close_mode == CloseMode::KnnClose && k_prime < 1) throw ConfigError("k_prime must be at least 1");
  if (background_mode == BackgroundMode::Cluster) {
    if (background_H < 1) throw ConfigError("background_H must be at least 1");
    if (background_m < 1 || background_m > n) throw ConfigError("background_m must lie in [1, N]");
  }
  if (kmeans_max_iters < 1) throw ConfigError("kmeans_max_iters must be at least 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  if (knn_k < 1 || knn_k > n) throw ConfigError("knn_k must lie in [1, N]");
  if (!std::is_sorted(lr_milestones.begin(), lr_milestones.end()))
    throw ConfigError("lr_milestones must be ascending");
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      const auto it = setters().find(key);
      if (it == setters().end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
      if (!seen.insert(std::string(key)).second)
        throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
      try {
        it->second(config, key, value);
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
      }
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_text(const TrainConfig& c) {
  std::string out;
  auto line = [&out](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
  line("tau", fmt::format("{:.17g}", c.tau));
  line("D", c.D);
  line("hidden", fmt::format("{}", fmt::join(c.hidden, ",")));
  line("lambda", fmt::format("{:.17g}", c.lambda));
  line("t", fmt::format("{:.17g}", c.t));
  line("k", c.k);
  line("H", c.H);
  line("m", c.m);
  line("batch_size", c.batch_size);
  line("epochs", c.epochs);
  line("warm_start_epochs", c.warm_start_epochs);
  line("lr", fmt::format("{:.17g}", c.lr));
  line("lr_milestones", fmt::format("{}", fmt::join(c.lr_milestones, ",")));
  line("lr_decay", fmt::format("{:.17g}", c.lr_decay));
  line("momentum", fmt::format("{:.17g}", c.momentum));
  line("recluster_every", c.recluster_every);
  line("recluster_unit", to_string(c.recluster_unit));
  line("background_mode", to_string(c.background_mode));
  line("close_mode", to_string(c.close_mode));
  line("k_prime", c.k_prime);
  line("background_H", c.background_H);
  line("background_m", c.background_m);
  line("seed", c.seed);
  line("cluster_source", to_string(c.cluster_source));
  line("kmeans_max_iters", c.kmeans_max_iters);
  line("knn_k", c.knn_k);
  line("val_fraction", fmt::format("{:.17g}", c.val_fraction));
  line("density_local", c.density_local);
  line("density_low", c.density_low);
  line("density_high", c.density_high);
  line("record_wallclock", c.record_wallclock ? "true" : "false");
  line("workers", c.workers);
  return out;
}

}  // namespace laggre
