#include "osciguard/nn/checkpoint.hpp"

#include <fstream>
#include <map>

#include "osciguard/core/binio.hpp"
#include "osciguard/core/errors.hpp"

namespace osciguard::nn {

namespace {
constexpr const char* kMagic = "OGCK1";

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  write_string(os, name);
  write_u32(os, static_cast<std::uint32_t>(t.ndim()));
  for (int d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
  write_f64_array(os, t.vec());
}
}  // namespace

void save_checkpoint(const std::string& path, Network& net, const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataFormatError("cannot open checkpoint for writing: " + path);

  nlohmann::json j;
  j["spec"] = meta.spec.to_json();
  j["bounds"] = {{"min_hz", meta.bounds.min_hz}, {"max_hz", meta.bounds.max_hz}};
  j["grid"] = meta.grid_name;
  j["dataset_seed"] = meta.dataset_seed;
  if (!meta.extra.is_null()) j["extra"] = meta.extra;

  write_bytes(os, kMagic, 5);
  write_u32(os, 1);
  write_string(os, j.dump());

  const auto params = net.params();
  const auto state = net.state();
  write_u32(os, static_cast<std::uint32_t>(params.size() + state.size()));
  for (const Param* p : params) write_tensor(os, p->name, p->value);
  for (const Param* p : state) write_tensor(os, p->name, p->value);
  if (!os) throw DataFormatError("short write while saving checkpoint: " + path);
}

std::pair<std::unique_ptr<Network>, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("cannot open checkpoint: " + path);
  expect_magic(is, kMagic, "checkpoint");
  if (read_u32(is) != 1) throw DataFormatError("unsupported checkpoint version");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_string(is));
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("bad checkpoint metadata: ") + e.what());
  }

  CheckpointMeta meta;
  try {
    meta.spec = NetworkSpec::from_json(j.at("spec"));
    meta.bounds.min_hz = j.at("bounds").at("min_hz").get<double>();
    meta.bounds.max_hz = j.at("bounds").at("max_hz").get<double>();
    meta.grid_name = j.value("grid", std::string{});
    meta.dataset_seed = j.value("dataset_seed", std::uint64_t{0});
    if (j.contains("extra")) meta.extra = j.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("bad checkpoint metadata: ") + e.what());
  }

  auto net = std::make_unique<Network>(meta.spec);
  std::map<std::string, Param*> by_name;
  for (Param* p : net->params()) by_name[p->name] = p;
  for (Param* p : net->state()) by_name[p->name] = p;

  const std::uint32_t count = read_u32(is);
  if (count != by_name.size())
    throw DataFormatError("checkpoint tensor count does not match the architecture");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    const std::uint32_t nd = read_u32(is);
    std::vector<int> shape(nd);
    for (auto& d : shape) d = static_cast<int>(read_u32(is));
    std::vector<double> vals = read_f64_array(is);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataFormatError("checkpoint has unknown tensor: " + name);
    Param& p = *it->second;
    if (p.value.shape() != shape)
      throw DataFormatError("checkpoint tensor " + name + " has shape " + shape_str(shape) +
                            ", expected " + shape_str(p.value.shape()));
    if (static_cast<long long>(vals.size()) != p.value.numel())
      throw DataFormatError("checkpoint tensor " + name + " has wrong element count");
    p.value.vec() = std::move(vals);
  }
  return {std::move(net), std::move(meta)};
}

}  // namespace osciguard::nn
