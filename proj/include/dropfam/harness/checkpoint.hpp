#pragma once

#include <fstream>
#include <map>
#include <string>
#include <variant>

#include "dropfam/family/evaluator.hpp"
#include "dropfam/harness/config.hpp"

namespace dropfam {

using AnyNet = std::variant<MlpNet, LstmNet>;

inline constexpr int kCheckpointVersion = 1;

// Versioned JSON checkpoint. Tensor values are written in shortest
// round-trip decimal form, so load(save(x)) is bit-exact.
struct Checkpoint {
  ExperimentConfig config;
  AnyNet net;
  std::size_t step = 0;
  std::uint64_t rng_base = 0;  // training streams derive from (rng_base, path)
};

inline json tensors_to_json(const AnyNet& net) {
  json arr = json::array();
  std::visit(
      [&](const auto& n) {
        n.params.for_each_tensor([&](const std::string& name, const Tensor& t) {
          arr.push_back({{"name", name}, {"shape", t.shape()}, {"data", t.values()}});
        });
      },
      net);
  return arr;
}

inline json to_json(const Checkpoint& ck) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["config"] = to_json(ck.config);
  j["step"] = ck.step;
  j["rng"] = {{"base", ck.rng_base}, {"next_step", ck.step}};
  if (const auto* lstm = std::get_if<LstmNet>(&ck.net)) {
    j["architecture"] = {{"type", "lstm"},
                         {"vocab", lstm->params.vocab},
                         {"embed", lstm->params.embed},
                         {"hidden", lstm->params.hidden},
                         {"tied", lstm->params.tied}};
  } else {
    j["architecture"] = {{"type", "mlp"}, {"layers", std::get<MlpNet>(ck.net).params.sizes}};
  }
  j["tensors"] = tensors_to_json(ck.net);
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    detail::reject_unknown(j, {"format_version", "config", "step", "rng", "architecture", "tensors"},
                           "checkpoint");
    if (j.at("format_version").get<int>() != kCheckpointVersion)
      throw ConfigError("checkpoint: unsupported format_version");
    Checkpoint ck;
    ck.config = parse_config(j.at("config"));
    ck.step = j.at("step").get<std::size_t>();
    ck.rng_base = j.at("rng").at("base").get<std::uint64_t>();
    const json& arch = j.at("architecture");
    std::map<std::string, Tensor> tensors;
    for (const auto& t : j.at("tensors")) {
      tensors[t.at("name").get<std::string>()] =
          Tensor(t.at("shape").get<std::vector<std::size_t>>(), t.at("data").get<std::vector<double>>());
    }
    auto fill = [&](auto& params) {
      params.for_each_tensor([&](const std::string& name, Tensor& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ConfigError("checkpoint: missing tensor '" + name + "'");
        require_shape(it->second, t.shape(), "checkpoint tensor '" + name + "'");
        t = it->second;
      });
    };
    if (arch.at("type") == "lstm") {
      LstmNet net{zero_lstm(arch.at("vocab"), arch.at("embed"), arch.at("hidden"), arch.at("tied")),
                  ck.config.dropout};
      fill(net.params);
      ck.net = std::move(net);
    } else {
      MlpNet net{zero_mlp(arch.at("layers").get<std::vector<std::size_t>>()), ck.config.dropout};
      fill(net.params);
      ck.net = std::move(net);
    }
    return ck;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

inline std::string serialize(const Checkpoint& ck) { return to_json(ck).dump() + "\n"; }

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << serialize(ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace dropfam
