#include "lfs/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lfs {
namespace {

using Setter = std::function<void(EngineConfig&, const std::string&)>;

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(d)) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
  return d;
}

long to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) {
    throw std::invalid_argument("config: " + key + " expects an integer");
  }
  return static_cast<long>(d);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"sigma_s", [](EngineConfig& c, const std::string& v) { c.encoder.sigma_s = to_double("sigma_s", v); }},
      {"sigma_o", [](EngineConfig& c, const std::string& v) { c.encoder.sigma_o = to_double("sigma_o", v); }},
      {"m_t", [](EngineConfig& c, const std::string& v) { c.m_t = to_double("m_t", v); }},
      {"s_r", [](EngineConfig& c, const std::string& v) { c.s_r = to_double("s_r", v); }},
      {"alpha", [](EngineConfig& c, const std::string& v) { c.alpha = to_double("alpha", v); }},
      {"vote_distance", [](EngineConfig& c, const std::string& v) { c.vote.max_distance = to_double("vote_distance", v); }},
      {"vote_angle", [](EngineConfig& c, const std::string& v) { c.vote.max_angle = to_double("vote_angle", v); }},
      {"vote_min", [](EngineConfig& c, const std::string& v) { c.vote.min_votes = static_cast<int>(to_int("vote_min", v)); }},
      {"n_minutiae", [](EngineConfig& c, const std::string& v) { c.matcher.n_minutiae = static_cast<std::size_t>(to_int("n_minutiae", v)); }},
      {"n_texture", [](EngineConfig& c, const std::string& v) { c.matcher.n_texture = static_cast<std::size_t>(to_int("n_texture", v)); }},
      {"tau_d", [](EngineConfig& c, const std::string& v) { c.matcher.tau_d = to_double("tau_d", v); }},
      {"tau_theta", [](EngineConfig& c, const std::string& v) { c.matcher.tau_theta = to_double("tau_theta", v); }},
      {"k_s", [](EngineConfig& c, const std::string& v) { c.matcher.k_s = static_cast<std::size_t>(to_int("k_s", v)); }},
      {"rho", [](EngineConfig& c, const std::string& v) { c.matcher.rho = to_double("rho", v); }},
      {"lambda1", [](EngineConfig& c, const std::string& v) { c.weights.minutiae1 = to_double("lambda1", v); }},
      {"lambda2", [](EngineConfig& c, const std::string& v) { c.weights.minutiae2 = to_double("lambda2", v); }},
      {"lambda3", [](EngineConfig& c, const std::string& v) { c.weights.minutiae3 = to_double("lambda3", v); }},
      {"lambda4", [](EngineConfig& c, const std::string& v) { c.weights.texture = to_double("lambda4", v); }},
      {"d0", [](EngineConfig& c, const std::string& v) { c.d0 = to_double("d0", v); }},
      {"stride", [](EngineConfig& c, const std::string& v) { c.stride = static_cast<int>(to_int("stride", v)); }},
      {"border_margin", [](EngineConfig& c, const std::string& v) { c.border_margin = static_cast<int>(to_int("border_margin", v)); }},
      {"topk", [](EngineConfig& c, const std::string& v) { c.topk = static_cast<std::size_t>(to_int("topk", v)); }},
      {"workers", [](EngineConfig& c, const std::string& v) { c.workers = static_cast<std::size_t>(to_int("workers", v)); }},
  };
  return table;
}

void check(const EngineConfig& c) {
  if (!(c.encoder.sigma_s > 0.0) || !(c.encoder.sigma_o > 0.0)) {
    throw std::invalid_argument("config: sigma_s and sigma_o must be positive");
  }
  if (!(c.alpha > 0.0)) {
    throw std::invalid_argument("config: alpha must be positive");
  }
  if (c.stride <= 0 || c.border_margin < 0) {
    throw std::invalid_argument("config: stride must be positive and border_margin non-negative");
  }
  if (c.weights.minutiae1 < 0.0 || c.weights.minutiae2 < 0.0 || c.weights.minutiae3 < 0.0 || c.weights.texture < 0.0) {
    throw std::invalid_argument("config: fusion weights must be non-negative");
  }
  if (c.workers == 0) {
    throw std::invalid_argument("config: workers must be at least 1");
  }
}

}  // namespace

EngineConfig parse_config(const std::string& text) {
  EngineConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(config, value);
  }
  check(config);
  return config;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const EngineConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "sigma_s = " << c.encoder.sigma_s << "\n"
      << "sigma_o = " << c.encoder.sigma_o << "\n"
      << "m_t = " << c.m_t << "\n"
      << "s_r = " << c.s_r << "\n"
      << "alpha = " << c.alpha << "\n"
      << "vote_distance = " << c.vote.max_distance << "\n"
      << "vote_angle = " << c.vote.max_angle << "\n"
      << "vote_min = " << c.vote.min_votes << "\n"
      << "n_minutiae = " << c.matcher.n_minutiae << "\n"
      << "n_texture = " << c.matcher.n_texture << "\n"
      << "tau_d = " << c.matcher.tau_d << "\n"
      << "tau_theta = " << c.matcher.tau_theta << "\n"
      << "k_s = " << c.matcher.k_s << "\n"
      << "rho = " << c.matcher.rho << "\n"
      << "lambda1 = " << c.weights.minutiae1 << "\n"
      << "lambda2 = " << c.weights.minutiae2 << "\n"
      << "lambda3 = " << c.weights.minutiae3 << "\n"
      << "lambda4 = " << c.weights.texture << "\n"
      << "d0 = " << c.d0 << "\n"
      << "stride = " << c.stride << "\n"
      << "border_margin = " << c.border_margin << "\n"
      << "topk = " << c.topk << "\n"
      << "workers = " << c.workers << "\n";
  return out.str();
}

void save_config(const EngineConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write config " + path.string());
  }
  out << format_config(config);
}

}  // namespace lfs
