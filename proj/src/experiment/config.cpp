// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/experiment/config.hpp"

#include <algorithm>
#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

namespace flower::experiment {

namespace {

constexpr std::array<std::pair<Task, const char*>, 8> kTaskNames{{
    {Task::kToyFm, "toy-fm"},
    {Task::kToyScore, "toy-score"},
    {Task::kToyFlowerFm, "toy-flower-fm"},
    {Task::kToyFlowerScore, "toy-flower-score"},
    {Task::kToyFlowerFmTimeAdaptive, "toy-flower-fm-timeadaptive"},
    {Task::kDistort, "distort"},
    {Task::kEvaluate, "evaluate"},
    {Task::kEulerCheck, "euler-check"},
}};

enum class Kind { kText, kInteger, kReal, kBool, kIntegerList, kRealList };

using Getter = std::function<std::string(const ExperimentConfig&)>;
using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

struct Field {
  std::string key;
  Kind kind;
  Getter get;
  Setter set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, raw, std::is_integral_v<T> ? "a non-negative integer" : "a number");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, raw, "a finite number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, raw, "a boolean");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) bad_value(key, raw, "a comma-separated list");
  return out;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
std::string format_list(const T& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      out += format_real(v);
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

// `ref` maps a config to the member it edits.
template <class Ref>
Field integer(std::string key, Ref ref) {
  return {key, Kind::kInteger, [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); },
          [ref, key](ExperimentConfig& c, const std::string& v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_number<std::uint64_t>(key, v));
          }};
}

template <class Ref>
Field real(std::string key, Ref ref) {
  return {key, Kind::kReal, [ref](const ExperimentConfig& c) { return format_real(ref(const_cast<ExperimentConfig&>(c))); },
          [ref, key](ExperimentConfig& c, const std::string& v) { ref(c) = parse_number<double>(key, v); }};
}

template <class Ref>
Field boolean(std::string key, Ref ref) {
  return {key, Kind::kBool,
          [ref](const ExperimentConfig& c) { return std::string(ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); },
          [ref, key](ExperimentConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); }};
}

template <class Ref>
Field text(std::string key, Ref ref) {
  return {key, Kind::kText, [ref](const ExperimentConfig& c) { return ref(const_cast<ExperimentConfig&>(c)); },
          [ref](ExperimentConfig& c, const std::string& v) { ref(c) = trim(v); }};
}

template <std::size_t N, class Ref>
Field real_array(std::string key, Ref ref) {
  return {key, Kind::kRealList, [ref](const ExperimentConfig& c) { return format_list(ref(const_cast<ExperimentConfig&>(c))); },
          [ref, key](ExperimentConfig& c, const std::string& v) {
            const auto values = parse_list<double>(key, v);
            if (values.size() != N) {
              throw ConfigError("config key '" + key + "' needs " + std::to_string(N) + " values, got " +
                                std::to_string(values.size()));
            }
            std::copy(values.begin(), values.end(), ref(c).begin());
          }};
}

Field enumeration(std::string key, Getter get, std::function<void(ExperimentConfig&, const std::string&)> parse) {
  return {key, Kind::kText, std::move(get), [parse, key](ExperimentConfig& c, const std::string& v) {
            try {
              parse(c, trim(v));
            } catch (const ConfigError&) {
              throw;
            } catch (const std::exception& e) {
              throw ConfigError("config key '" + key + "': " + e.what());
            }
          }};
}

std::string weighting_name(paths::ScoreWeighting w) {
  return w == paths::ScoreWeighting::kSigmaSquared ? "sigma2" : "none";
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      enumeration("run.task", [](const C& c) { return to_string(c.task); },
                  [](C& c, const std::string& v) { c.task = parse_task(v); }),
      integer("run.seed", [](C& c) -> auto& { return c.seed; }),
      text("run.output_dir", [](C& c) -> auto& { return c.output_dir; }),

      integer("train.steps", [](C& c) -> auto& { return c.train_steps; }),
      integer("train.batch", [](C& c) -> auto& { return c.batch; }),
      real("train.lr", [](C& c) -> auto& { return c.lr; }),
      boolean("train.lr_decay", [](C& c) -> auto& { return c.lr_decay; }),

      Field{"sample.steps", Kind::kIntegerList, [](const C& c) { return format_list(c.sampler_steps); },
            [](C& c, const std::string& v) {
              const auto values = parse_list<std::uint64_t>("sample.steps", v);
              c.sampler_steps.assign(values.begin(), values.end());
            }},
      integer("sample.test_rows", [](C& c) -> auto& { return c.test_rows; }),
      boolean("sample.trajectory", [](C& c) -> auto& { return c.trajectory; }),

      enumeration("toy.distribution", [](const C& c) { return paths::to_string(c.toy.distribution); },
                  [](C& c, const std::string& v) { c.toy.distribution = paths::parse_toy_distribution(v); }),
      real_array<4>("toy.mixing", [](C& c) -> auto& { return c.toy.mixing; }),
      real("toy.noise_std", [](C& c) -> auto& { return c.toy.noise_std; }),
      real_array<2>("toy.mean", [](C& c) -> auto& { return c.toy.mean; }),
      real_array<2>("toy.stddev", [](C& c) -> auto& { return c.toy.stddev; }),
      integer("toy.components", [](C& c) -> auto& { return c.toy.components; }),
      real("toy.radius", [](C& c) -> auto& { return c.toy.radius; }),
      real("toy.component_std", [](C& c) -> auto& { return c.toy.component_std; }),
      real("toy.moon_noise", [](C& c) -> auto& { return c.toy.moon_noise; }),

      integer("field.hidden_width", [](C& c) -> auto& { return c.field_width; }),
      integer("field.hidden_layers", [](C& c) -> auto& { return c.field_layers; }),

      integer("flow.blocks", [](C& c) -> auto& { return c.flow_blocks; }),
      integer("flow.hidden_width", [](C& c) -> auto& { return c.flow_width; }),
      integer("flow.hidden_layers", [](C& c) -> auto& { return c.flow_layers; }),
      integer("flow.bins", [](C& c) -> auto& { return c.flow_bins; }),
      real("flow.bound", [](C& c) -> auto& { return c.flow_bound; }),

      real("path.sigma_lo", [](C& c) -> auto& { return c.sigma_lo; }),
      real("path.sigma_hi", [](C& c) -> auto& { return c.sigma_hi; }),
      real("path.sigma_min", [](C& c) -> auto& { return c.sigma_min; }),
      real("path.t_eps", [](C& c) -> auto& { return c.t_eps; }),
      enumeration("path.weighting", [](const C& c) { return weighting_name(c.weighting); },
                  [](C& c, const std::string& v) {
                    if (v == "sigma2") {
                      c.weighting = paths::ScoreWeighting::kSigmaSquared;
                    } else if (v == "none") {
                      c.weighting = paths::ScoreWeighting::kNone;
                    } else {
                      throw ConfigError("config key 'path.weighting': expected sigma2 or none, got '" + v + "'");
                    }
                  }),

      boolean("guidance.detach_latent", [](C& c) -> auto& { return c.detach_latent; }),
      boolean("guidance.resample_per_step", [](C& c) -> auto& { return c.resample_per_step; }),
      boolean("guidance.dump", [](C& c) -> auto& { return c.dump_guidance; }),

      text("distort.input_dir", [](C& c) -> auto& { return c.distort_input; }),
      text("distort.noise_dir", [](C& c) -> auto& { return c.distort_noise; }),
      text("distort.manifest", [](C& c) -> auto& { return c.distort_manifest; }),
      enumeration("distort.family", [](const C& c) { return dsp::to_string(c.family); },
                  [](C& c, const std::string& v) { c.family = dsp::parse_filter_family(v); }),
      integer("distort.order", [](C& c) -> auto& { return c.filter_order; }),
      real("distort.ripple_db", [](C& c) -> auto& { return c.ripple_db; }),
      real("distort.rir_length_s", [](C& c) -> auto& { return c.rir_length_s; }),
      real("distort.snr_lo", [](C& c) -> auto& { return c.ranges.snr_lo; }),
      real("distort.snr_hi", [](C& c) -> auto& { return c.ranges.snr_hi; }),
      real("distort.rt60_lo", [](C& c) -> auto& { return c.ranges.rt60_lo; }),
      real("distort.rt60_hi", [](C& c) -> auto& { return c.ranges.rt60_hi; }),
      real("distort.cutoff_lo", [](C& c) -> auto& { return c.ranges.cutoff_lo; }),
      real("distort.cutoff_hi", [](C& c) -> auto& { return c.ranges.cutoff_hi; }),
      enumeration("distort.format",
                  [](const C& c) { return std::string(c.wav_format == dsp::WavFormat::kPcm16 ? "pcm16" : "float32"); },
                  [](C& c, const std::string& v) {
                    if (v == "pcm16") {
                      c.wav_format = dsp::WavFormat::kPcm16;
                    } else if (v == "float32") {
                      c.wav_format = dsp::WavFormat::kFloat32;
                    } else {
                      throw ConfigError("config key 'distort.format': expected pcm16 or float32, got '" + v + "'");
                    }
                  }),

      text("evaluate.ref_dir", [](C& c) -> auto& { return c.evaluate_ref; }),
      text("evaluate.est_dir", [](C& c) -> auto& { return c.evaluate_est; }),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::string json_scalar_text(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!item.is_number()) throw ConfigError("config key '" + key + "': list items must be numbers");
      if (!out.empty()) out += ',';
      out += item.dump();
    }
    return out;
  }
  throw ConfigError("config key '" + key + "': unsupported JSON value " + v.dump());
}

}  // namespace

Task parse_task(const std::string& name) {
  for (const auto& [task, label] : kTaskNames) {
    if (name == label) return task;
  }
  std::string all;
  for (const auto& [task, label] : kTaskNames) all += std::string(all.empty() ? "" : ", ") + label;
  throw ConfigError("unknown task '" + name + "' (expected one of: " + all + ")");
}

std::string to_string(Task task) {
  for (const auto& [t, label] : kTaskNames) {
    if (t == task) return label;
  }
  return "unknown";
}

bool is_toy_task(Task task) {
  return task == Task::kToyFm || task == Task::kToyScore || task == Task::kToyFlowerFm ||
         task == Task::kToyFlowerScore || task == Task::kToyFlowerFmTimeAdaptive;
}

bool uses_guidance(Task task) {
  return task == Task::kToyFlowerFm || task == Task::kToyFlowerScore || task == Task::kToyFlowerFmTimeAdaptive;
}

bool uses_score(Task task) { return task == Task::kToyScore || task == Task::kToyFlowerScore; }

void ExperimentConfig::validate() const {
  require(train_steps > 0, "train.steps must be >= 1");
  require(batch > 0, "train.batch must be >= 1");
  require(lr > 0.0, "train.lr must be positive");
  require(!sampler_steps.empty(), "sample.steps must list at least one value");
  for (auto n : sampler_steps) require(n > 0, "sample.steps values must be >= 1");
  require(test_rows > 0, "sample.test_rows must be >= 1");
  require(toy.noise_std >= 0.0, "toy.noise_std must be >= 0");
  require(toy.components > 0, "toy.components must be >= 1");
  require(field_width > 0, "field.hidden_width must be >= 1");
  require(field_layers >= 3, "field.hidden_layers must be >= 3");
  require(flow_blocks > 0 && flow_width > 0 && flow_layers > 0, "flow sizes must be >= 1");
  require(flow_bins >= 2, "flow.bins must be >= 2");
  require(flow_bound > 0.0, "flow.bound must be positive");
  require(sigma_lo > 0.0 && sigma_hi > sigma_lo, "path.sigma_lo must be positive and below path.sigma_hi");
  require(sigma_min >= 0.0 && sigma_min < 1.0, "path.sigma_min must lie in [0, 1)");
  require(t_eps >= 0.0 && t_eps < 1.0, "path.t_eps must lie in [0, 1)");
  require(filter_order > 0, "distort.order must be >= 1");
  require(ripple_db > 0.0, "distort.ripple_db must be positive");
  require(rir_length_s > 0.0, "distort.rir_length_s must be positive");
  require(ranges.snr_lo <= ranges.snr_hi, "distort.snr_lo must not exceed distort.snr_hi");
  require(ranges.rt60_lo <= ranges.rt60_hi && ranges.rt60_lo >= 0.0, "distort rt60 range is invalid");
  require(ranges.cutoff_lo <= ranges.cutoff_hi && ranges.cutoff_lo > 0.0 && ranges.cutoff_hi < dsp::kSampleRate / 2.0,
          "distort cutoff range must lie inside (0, 8000) Hz");
  if (task == Task::kDistort) require(!distort_input.empty() || !distort_manifest.empty(), "distort.input_dir is required");
  if (task == Task::kEvaluate) require(!evaluate_ref.empty() && !evaluate_est.empty(), "evaluate.ref_dir and evaluate.est_dir are required");
}

void set_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  find_field(key).set(config, value);
}

std::string get_value(const ExperimentConfig& config, const std::string& key) { return find_field(key).get(config); }

bool is_numeric_key(const std::string& key) {
  const auto kind = find_field(key).kind;
  return kind == Kind::kInteger || kind == Kind::kReal || kind == Kind::kIntegerList || kind == Kind::kRealList;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

ExperimentConfig parse_ini(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' is outside any [section]");
    for (const auto& [key, value] : body) set_value(config, section + "." + key, value.data());
  }
  config.validate();
  return config;
}

ExperimentConfig parse_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config JSON error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config JSON must be an object of sections");
  ExperimentConfig config;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const std::string full = section + "." + key;
      set_value(config, full, json_scalar_text(value, full));
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return json ? parse_json(buf.str()) : parse_ini(buf.str());
}

std::string to_ini(const ExperimentConfig& config) {
  std::string out, section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      out += (out.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string to_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    auto& slot = j[f.key.substr(0, dot)][f.key.substr(dot + 1)];
    const std::string v = f.get(config);
    switch (f.kind) {
      case Kind::kText:
        slot = v;
        break;
      case Kind::kInteger:
        slot = parse_number<std::uint64_t>(f.key, v);
        break;
      case Kind::kReal:
        slot = parse_number<double>(f.key, v);
        break;
      case Kind::kBool:
        slot = v == "true";
        break;
      case Kind::kIntegerList:
        slot = parse_list<std::uint64_t>(f.key, v);
        break;
      case Kind::kRealList:
        slot = parse_list<double>(f.key, v);
        break;
    }
  }
  return j.dump(2);
}

}  // namespace flower::experiment
