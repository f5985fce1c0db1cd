#include "osciguard/nn/network.hpp"

#include <nlohmann/json.hpp>

#include "osciguard/core/errors.hpp"

namespace osciguard::nn {

using nlohmann::json;

json NetworkSpec::to_json() const {
  return json{{"family", family},   {"units1", units1},   {"units2", units2},
              {"units3", units3},   {"filters1", filters1}, {"filters2", filters2},
              {"kernel1", kernel1}, {"kernel2", kernel2}, {"dropout", dropout},
              {"lr", lr},           {"batch", batch},     {"epochs", epochs},
              {"init_seed", init_seed}};
}

NetworkSpec NetworkSpec::from_json(const json& j) {
  NetworkSpec s;
  try {
    s.family = j.at("family").get<std::string>();
    s.units1 = j.at("units1").get<int>();
    s.units2 = j.at("units2").get<int>();
    s.units3 = j.at("units3").get<int>();
    s.filters1 = j.at("filters1").get<int>();
    s.filters2 = j.at("filters2").get<int>();
    s.kernel1 = j.at("kernel1").get<int>();
    s.kernel2 = j.at("kernel2").get<int>();
    s.dropout = j.at("dropout").get<double>();
    s.lr = j.at("lr").get<double>();
    s.batch = j.at("batch").get<int>();
    s.epochs = j.at("epochs").get<int>();
    s.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("bad network spec: ") + e.what());
  }
  return s;
}

namespace {

void check_spec(const NetworkSpec& s) {
  if (s.family != "lstm" && s.family != "convlstm")
    throw UsageError("unknown model family: " + s.family);
  if (s.units1 < 1 || s.units2 < 1 || s.units3 < 1)
    throw UsageError("layer widths must be positive");
  if (s.filters1 < 1 || s.filters2 < 1) throw UsageError("filter counts must be positive");
  if (s.kernel1 < 1 || s.kernel2 < 1) throw UsageError("kernel sizes must be positive");
  if (s.dropout < 0.0 || s.dropout >= 1.0) throw UsageError("dropout must be in [0, 1)");
  if (s.lr <= 0.0) throw UsageError("learning rate must be positive");
  if (s.batch < 1 || s.epochs < 1) throw UsageError("batch and epochs must be positive");
}

}  // namespace

Network::Network(const NetworkSpec& spec) : spec_(spec) {
  check_spec(spec_);
  Rng root(spec_.init_seed);
  std::uint64_t tag = 1;
  auto next_rng = [&] { return root.stream(tag++); };
  auto add = [&](std::unique_ptr<Layer> l, const std::string& name) {
    l->set_name(name);
    layers_.push_back(std::move(l));
  };

  if (spec_.family == "lstm") {
    add(std::make_unique<Lstm>(kInputFeatures, spec_.units1, true, next_rng()), "lstm1");
    add(std::make_unique<Dense>(spec_.units1, spec_.units2, next_rng()), "dense1");
    add(std::make_unique<LeakyReLU>(), "act1");
    add(std::make_unique<BatchNorm>(spec_.units2), "bn1");
    add(std::make_unique<Dropout>(spec_.dropout, mix_seed(spec_.init_seed, tag++)), "drop1");
    add(std::make_unique<Dense>(spec_.units2, spec_.units3, next_rng()), "dense2");
    add(std::make_unique<LeakyReLU>(), "act2");
    add(std::make_unique<BatchNorm>(spec_.units3), "bn2");
    add(std::make_unique<Dropout>(spec_.dropout, mix_seed(spec_.init_seed, tag++)), "drop2");
    add(std::make_unique<Flatten>(), "flatten");
    add(std::make_unique<Dense>(kInputSteps * spec_.units3, 1, next_rng()), "head");
  } else {
    add(std::make_unique<Reshape>(std::vector<int>{kFrameCount, kFrameHeight, kInputFeatures, 1}),
        "frames");
    add(std::make_unique<ConvLstm2d>(1, spec_.filters1, spec_.kernel1, true, next_rng()),
        "convlstm1");
    add(std::make_unique<BatchNorm>(spec_.filters1), "bn1");
    add(std::make_unique<Dropout>(spec_.dropout, mix_seed(spec_.init_seed, tag++)), "drop1");
    add(std::make_unique<Dense>(spec_.filters1, spec_.units2, next_rng()), "dense1");
    add(std::make_unique<LeakyReLU>(), "act1");
    add(std::make_unique<BatchNorm>(spec_.units2), "bn2");
    add(std::make_unique<Dropout>(spec_.dropout, mix_seed(spec_.init_seed, tag++)), "drop2");
    add(std::make_unique<ConvLstm2d>(spec_.units2, spec_.filters2, spec_.kernel2, true,
                                     next_rng()),
        "convlstm2");
    add(std::make_unique<BatchNorm>(spec_.filters2), "bn3");
    add(std::make_unique<Dropout>(spec_.dropout, mix_seed(spec_.init_seed, tag++)), "drop3");
    add(std::make_unique<Flatten>(), "flatten");
    add(std::make_unique<Dense>(kFrameCount * kFrameHeight * kInputFeatures * spec_.filters2, 1,
                                next_rng()),
        "head");
  }
}

void Network::validate_input(const Tensor& x) const {
  if (x.ndim() != 3 || x.dim(1) != kInputSteps || x.dim(2) != kInputFeatures)
    throw UsageError("detector input must be [batch, 240, 2], got " + shape_str(x.shape()));
}

Tensor Network::forward(const Tensor& x, bool training) {
  validate_input(x);
  ctx_.training = training;
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, ctx_);
  return cur;
}

void Network::backward(const Tensor& dlogits) {
  Tensor cur = dlogits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur, ctx_);
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& l : layers_)
    for (Param* p : l->params()) {
      if (p->name.find('.') == std::string::npos) p->name = l->name() + "." + p->name;
      out.push_back(p);
    }
  return out;
}

std::vector<Param*> Network::state() {
  std::vector<Param*> out;
  for (auto& l : layers_)
    for (Param* p : l->state()) {
      if (p->name.find('.') == std::string::npos) p->name = l->name() + "." + p->name;
      out.push_back(p);
    }
  return out;
}

void Network::zero_grad() {
  for (Param* p : params()) p->grad.fill(0.0);
}

long long Network::n_params() {
  long long n = 0;
  for (Param* p : params()) n += p->value.numel();
  return n;
}

}  // namespace osciguard::nn
