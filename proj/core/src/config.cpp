#include "streamrobust/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace streamrobust {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

bool parse_number(const std::string& text, double& out) {
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

bool parse_number(const std::string& text, std::uint64_t& out) {
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

using Setter = std::function<void(const std::string& value, std::vector<std::string>& errors)>;

struct Key {
  Setter set;
  bool required = false;
};

class Schema {
 public:
  void add(std::string name, Setter set, bool required = false) {
    keys_[std::move(name)] = {std::move(set), required};
  }
  const Key* find(const std::string& name) const {
    const auto it = keys_.find(name);
    return it == keys_.end() ? nullptr : &it->second;
  }
  bool has_section(const std::string& section) const {
    return std::any_of(keys_.begin(), keys_.end(), [&](const auto& kv) {
      return kv.first.compare(0, section.size() + 1, section + ".") == 0;
    });
  }
  std::vector<std::string> required() const {
    std::vector<std::string> out;
    for (const auto& [name, key] : keys_) {
      if (key.required) out.push_back(name);
    }
    return out;
  }

 private:
  std::map<std::string, Key> keys_;
};

// Setter factories: each writes into `target` or appends a message naming `key`.
Setter size_setter(std::string key, std::size_t& target) {
  return [key, &target](const std::string& v, std::vector<std::string>& errors) {
    std::uint64_t x = 0;
    if (parse_number(v, x)) target = static_cast<std::size_t>(x);
    else errors.push_back(key + ": expected a nonnegative integer, got '" + v + "'");
  };
}

Setter u64_setter(std::string key, std::uint64_t& target) {
  return [key, &target](const std::string& v, std::vector<std::string>& errors) {
    if (!parse_number(v, target)) {
      errors.push_back(key + ": expected an unsigned 64-bit integer, got '" + v + "'");
    }
  };
}

Setter real_setter(std::string key, double& target) {
  return [key, &target](const std::string& v, std::vector<std::string>& errors) {
    if (!parse_number(v, target)) errors.push_back(key + ": expected a number, got '" + v + "'");
  };
}

Setter optional_real_setter(std::string key, std::optional<double>& target,
                            std::string unset_word) {
  return [key, &target, unset_word](const std::string& v, std::vector<std::string>& errors) {
    if (v == unset_word) {
      target.reset();
      return;
    }
    double x = 0.0;
    if (parse_number(v, x)) target = x;
    else errors.push_back(key + ": expected a number or '" + unset_word + "', got '" + v + "'");
  };
}

Setter real_list_setter(std::string key, std::vector<double>& target) {
  return [key, &target](const std::string& v, std::vector<std::string>& errors) {
    target.clear();
    for (const auto& item : split_list(v)) {
      double x = 0.0;
      if (parse_number(item, x)) target.push_back(x);
      else errors.push_back(key + ": expected a number, got '" + item + "'");
    }
  };
}

template <class Enum>
Setter enum_list_setter(std::string key, std::vector<Enum>& target,
                        std::vector<std::pair<std::string, Enum>> names) {
  return [key, &target, names](const std::string& v, std::vector<std::string>& errors) {
    target.clear();
    for (const auto& item : split_list(v)) {
      const auto it = std::find_if(names.begin(), names.end(),
                                   [&](const auto& p) { return p.first == item; });
      if (it != names.end()) {
        target.push_back(it->second);
        continue;
      }
      std::string allowed;
      for (const auto& p : names) allowed += (allowed.empty() ? "" : ", ") + p.first;
      errors.push_back(key + ": unknown value '" + item + "' (expected one of " + allowed + ")");
    }
  };
}

template <class Enum>
Setter enum_setter(std::string key, Enum& target,
                   std::vector<std::pair<std::string, Enum>> names) {
  return [key, &target, names](const std::string& v, std::vector<std::string>& errors) {
    for (const auto& [name, value] : names) {
      if (name == v) {
        target = value;
        return;
      }
    }
    std::string allowed;
    for (const auto& p : names) allowed += (allowed.empty() ? "" : ", ") + p.first;
    errors.push_back(key + ": unknown value '" + v + "' (expected one of " + allowed + ")");
  };
}

Schema make_schema(ExperimentConfig& c) {
  Schema s;
  s.add("experiment.seed", u64_setter("experiment.seed", c.seed), true);
  s.add("experiment.replications", size_setter("experiment.replications", c.replications), true);
  s.add("experiment.passes", size_setter("experiment.passes", c.passes), true);

  s.add("model.dimension", size_setter("model.dimension", c.dimension), true);
  s.add("model.samples", size_setter("model.samples", c.samples), true);
  s.add("model.sigma", real_setter("model.sigma", c.sigma), true);
  s.add("model.theta_norm", real_setter("model.theta_norm", c.theta_norm));
  s.add("model.covariances",
        enum_list_setter<CovarianceChoice>("model.covariances", c.covariances,
                                           {{"identity", CovarianceChoice::Identity},
                                            {"inverse_k", CovarianceChoice::InverseK}}),
        true);

  s.add("outliers.preset",
        enum_setter<ContaminationPreset>("outliers.preset", c.contamination.preset,
                                         {{"none", ContaminationPreset::None},
                                          {"three_population", ContaminationPreset::ThreePopulation},
                                          {"point_mass", ContaminationPreset::PointMass},
                                          {"uniform", ContaminationPreset::Uniform}}),
        true);
  s.add("outliers.eta", real_setter("outliers.eta", c.contamination.eta), true);
  s.add("outliers.value", real_setter("outliers.value", c.contamination.value));
  s.add("outliers.lo", real_setter("outliers.lo", c.contamination.lo));
  s.add("outliers.hi", real_setter("outliers.hi", c.contamination.hi));

  s.add("optimizer.gamma0", optional_real_setter("optimizer.gamma0", c.gamma0, "auto"));
  s.add("optimizer.gamma0_scale",
        enum_setter<Gamma0Rule>("optimizer.gamma0_scale", c.gamma0_rule,
                                {{"trace", Gamma0Rule::InverseTrace},
                                 {"sqrt_trace", Gamma0Rule::InverseSqrtTrace}}));
  s.add("optimizer.checkpoint_ratio",
        real_setter("optimizer.checkpoint_ratio", c.checkpoint_ratio));
  s.add("optimizer.losses",
        enum_list_setter<EstimatorKind>("optimizer.losses", c.estimators,
                                        {{"l1", EstimatorKind::L1},
                                         {"l2", EstimatorKind::L2},
                                         {"huber", EstimatorKind::Huber},
                                         {"oracle", EstimatorKind::Oracle}}),
        true);

  s.add("huber.tau", optional_real_setter("huber.tau", c.huber_tau, "tuned"));
  s.add("huber.tau_grid", real_list_setter("huber.tau_grid", c.tau_grid));
  s.add("huber.multipliers", real_list_setter("huber.multipliers", c.huber_multipliers));

  s.add("breakdown.eta_grid", real_list_setter("breakdown.eta_grid", c.eta_grid));
  s.add("breakdown.huber_multipliers",
        real_list_setter("breakdown.huber_multipliers", c.breakdown_multipliers));

  s.add("analytic.quadrature_order",
        size_setter("analytic.quadrature_order", c.quadrature_order));
  return s;
}

}  // namespace

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = "configuration has " + std::to_string(errors.size()) + " error(s):";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }

  ExperimentConfig config;
  const Schema schema = make_schema(config);
  std::vector<std::string> errors;
  std::set<std::string> seen;

  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      errors.push_back("top-level key '" + section + "' outside any section");
      continue;
    }
    if (!schema.has_section(section)) {
      errors.push_back("unknown section [" + section + "]");
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const Key* k = schema.find(name);
      if (k == nullptr) {
        errors.push_back("unknown key '" + name + "'");
        continue;
      }
      seen.insert(name);
      k->set(trim(node.data()), errors);
    }
  }

  for (const auto& name : schema.required()) {
    if (seen.count(name)) continue;
    if (name == "outliers.eta" && config.contamination.preset == ContaminationPreset::None) {
      config.contamination.eta = 0.0;
      continue;
    }
    errors.push_back("missing required key '" + name + "'");
  }
  // Semantic checks only make sense once the syntax is clean.
  if (errors.empty()) errors = config.validate();
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path.string() + "'"});
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  // canonical_text is `section.key=value` in section order; regroup it.
  std::istringstream lines(config.canonical_text());
  std::string line;
  std::string current;
  while (std::getline(lines, line)) {
    const auto dot = line.find('.');
    const auto eq = line.find('=');
    const std::string section = line.substr(0, dot);
    const std::string key = line.substr(dot + 1, eq - dot - 1);
    std::string value = line.substr(eq + 1);
    if (section != current) {
      out << (current.empty() ? "" : "\n") << '[' << section << "]\n";
      current = section;
    }
    if (value.find(' ') != std::string::npos) {
      std::replace(value.begin(), value.end(), ' ', ',');
    }
    out << key << " = " << value << '\n';
  }
}

}  // namespace streamrobust
