#include "maint/config.hpp"

#include <fstream>
#include <sstream>

#include "maint/data.hpp"

namespace maint {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "model.d") model.d = to_size(key, value);
  else if (key == "model.J" || key == "model.aspects") model.aspects = to_size(key, value);
  else if (key == "model.gamma") model.gamma = to_double(key, value);
  else if (key == "model.lambda") model.lambda = to_double(key, value);
  else if (key == "model.dropout") model.dropout_rate = to_double(key, value);
  else if (key == "model.variant") model.variant = parse_variant(value);
  else if (key == "model.prefix_masking") model.prefix_masking = to_bool(key, value);
  else if (key == "train.learning_rate") train.learning_rate = to_double(key, value);
  else if (key == "train.batch_size") train.batch_size = to_size(key, value);
  else if (key == "train.max_epochs") train.max_epochs = to_size(key, value);
  else if (key == "train.patience") train.patience = to_size(key, value);
  else if (key == "data.max_len") max_len = to_size(key, value);
  else if (key == "data.negatives") negatives = to_size(key, value);
  else if (key == "seed") {
    seed = to_size(key, value);
    train.seed = seed;
  } else {
    throw ConfigError("unknown configuration key: " + key);
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + t + "'");
    apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be key=value, got '" + assignment + "'");
  apply(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "model.d=" << model.d << "\n";
  os << "model.J=" << model.aspects << "\n";
  os << "model.gamma=" << model.gamma << "\n";
  os << "model.lambda=" << model.lambda << "\n";
  os << "model.dropout=" << model.dropout_rate << "\n";
  os << "model.variant=" << variant_name(model.variant) << "\n";
  os << "model.prefix_masking=" << (model.prefix_masking ? 1 : 0) << "\n";
  os << "train.learning_rate=" << train.learning_rate << "\n";
  os << "train.batch_size=" << train.batch_size << "\n";
  os << "train.max_epochs=" << train.max_epochs << "\n";
  os << "train.patience=" << train.patience << "\n";
  os << "data.max_len=" << max_len << "\n";
  os << "data.negatives=" << negatives << "\n";
  os << "seed=" << seed << "\n";
  return os.str();
}

}  // namespace maint
