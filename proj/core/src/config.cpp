#include "nlsd/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nlsd {

namespace {

std::string trim(const std::string& s) {
  const std::size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const std::size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: '" + key + "' has non-numeric value '" + value + "'");
  }
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: '" + key + "' has non-integer value '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: '" + key + "' has non-integer value '" + value + "'");
  }
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_int(key, item));
  }
  if (out.empty()) throw std::invalid_argument("config: '" + key + "' has an empty list");
  return out;
}

}  // namespace

KeyValueMap parse_config_text(const std::string& text) {
  KeyValueMap kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not 'key = value': '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " has an empty key or value");
    }
    kv[key] = value;
  }
  return kv;
}

KeyValueMap parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(TrainConfig& cfg, const KeyValueMap& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "lambda") {
      cfg.lambda = to_double(key, value);
    } else if (key == "alpha") {
      cfg.alpha = to_double(key, value);
    } else if (key == "rounds") {
      cfg.rounds = to_int(key, value);
    } else if (key == "max_epochs_per_round") {
      cfg.max_epochs_per_round = to_int(key, value);
    } else if (key == "base_lr") {
      cfg.base_lr = to_double(key, value);
    } else if (key == "momentum") {
      cfg.momentum = to_double(key, value);
    } else if (key == "lr_drop_factor") {
      cfg.lr_drop_factor = to_double(key, value);
    } else if (key == "poly_power") {
      cfg.poly_power = to_double(key, value);
    } else if (key == "accumulation_steps") {
      cfg.accumulation_steps = to_int(key, value);
    } else if (key == "seed") {
      cfg.seed = to_u64(key, value);
    } else if (key == "variance_floor") {
      cfg.variance_floor = to_double(key, value);
    } else if (key == "in_channels") {
      cfg.predictor.in_channels = to_int(key, value);
    } else if (key == "kernel") {
      cfg.predictor.kernel = to_int(key, value);
    } else if (key == "channels") {
      cfg.predictor.channels = to_int_list(key, value);
    } else if (key == "dilations") {
      cfg.predictor.dilations = to_int_list(key, value);
    } else if (key == "input_height") {
      cfg.predictor.input_height = to_int(key, value);
    } else if (key == "input_width") {
      cfg.predictor.input_width = to_int(key, value);
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
}

}  // namespace nlsd
