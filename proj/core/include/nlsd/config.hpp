#pragma once

#include <map>
#include <string>

#include "nlsd/trainer.hpp"

namespace nlsd {

using KeyValueMap = std::map<std::string, std::string>;

// Flat "key = value" lines; blank lines and '#' comments are skipped.
KeyValueMap parse_config_text(const std::string& text);
KeyValueMap parse_config_file(const std::string& path);

// Applies recognized TrainConfig keys (lambda, alpha, rounds,
// max_epochs_per_round, base_lr, momentum, lr_drop_factor, poly_power,
// accumulation_steps, seed, variance_floor, in_channels, kernel, channels,
// dilations, input_height, input_width). Unknown keys throw so typos do not
// silently fall back to defaults.
void apply_config(TrainConfig& cfg, const KeyValueMap& kv);

}  // namespace nlsd
