#pragma once

#include <memory>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "osciguard/data/window.hpp"
#include "osciguard/nn/network.hpp"

namespace osciguard::nn {

struct CheckpointMeta {
  NetworkSpec spec;
  data::NormBounds bounds;  // normalization the detector was trained with
  std::string grid_name;
  std::uint64_t dataset_seed = 0;
  nlohmann::json extra;  // free-form: metrics, timing-independent provenance
};

void save_checkpoint(const std::string& path, Network& net, const CheckpointMeta& meta);

std::pair<std::unique_ptr<Network>, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace osciguard::nn
