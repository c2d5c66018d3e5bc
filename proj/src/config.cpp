// SPDX-License-Identifier: Apache-2.0
#include "gennv/config.hpp"

#include <functional>
#include <map>
#include <cstdint>
#include <string>

#include "gennv/error.hpp"

namespace gennv {

using nlohmann::json;

namespace {

using Setter = std::function<void(const json&)>;

// Dispatches each key of `j` to its setter; anything else is rejected.
void overlay(const json& j, std::string_view section, const std::map<std::string, Setter>& setters) {
  if (!j.is_object()) {
    throw Error(ErrorKind::config, std::string(section) + ": expected a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw Error(ErrorKind::config, std::string(section) + ": unknown key '" + key + "'");
    }
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::config, std::string(section) + "." + key + ": " + e.what());
    }
  }
}

template <typename T>
Setter set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

Setter set_size(std::size_t& field) {
  return [&field](const json& v) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw Error(ErrorKind::config, "expected a nonnegative integer");
    field = v.get<std::size_t>();
  };
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"strategy", std::string(to_string(c.strategy))},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"lr_final_fraction", c.lr_final_fraction},
              {"average_fraction", c.average_fraction},
              {"weight_decay", c.weight_decay},
              {"hidden", c.hidden},
              {"noise_dim", c.noise_dim},
              {"samples_per_condition", c.samples_per_condition},
              {"discriminator_hidden", c.discriminator_hidden},
              {"use_text", c.use_text},
              {"embedding_dim", c.embedding_dim},
              {"demand_max", c.demand_max},
              {"seed", c.seed}};
}

void apply_json(const json& j, TrainConfig& c) {
  overlay(j, "cdgm",
          {{"strategy", [&c](const json& v) { c.strategy = parse_train_strategy(v.get<std::string>()); }},
           {"epochs", set(c.epochs)},
           {"batch_size", set(c.batch_size)},
           {"lr", set(c.lr)},
           {"beta1", set(c.beta1)},
           {"beta2", set(c.beta2)},
           {"lr_final_fraction", set(c.lr_final_fraction)},
           {"average_fraction", set(c.average_fraction)},
           {"weight_decay", set(c.weight_decay)},
           {"hidden", set(c.hidden)},
           {"noise_dim", set(c.noise_dim)},
           {"samples_per_condition", set(c.samples_per_condition)},
           {"discriminator_hidden", set(c.discriminator_hidden)},
           {"use_text", set(c.use_text)},
           {"embedding_dim", set(c.embedding_dim)},
           {"demand_max", set(c.demand_max)},
           {"seed", set(c.seed)}});
}

json to_json(const ErmConfig& c) {
  return json{{"linear_steps", c.linear_steps},
              {"linear_lr", c.linear_lr},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"hidden", c.hidden},
              {"lr_final_fraction", c.lr_final_fraction},
              {"seed", c.seed}};
}

void apply_json(const json& j, ErmConfig& c) {
  overlay(j, "erm",
          {{"linear_steps", set(c.linear_steps)},
           {"linear_lr", set(c.linear_lr)},
           {"epochs", set(c.epochs)},
           {"batch_size", set(c.batch_size)},
           {"lr", set(c.lr)},
           {"hidden", set(c.hidden)},
           {"lr_final_fraction", set(c.lr_final_fraction)},
           {"seed", set(c.seed)}});
}

json to_json(const CostParams& c) { return json{{"c", c.c}, {"s", c.s}}; }

void apply_json(const json& j, CostParams& c) {
  overlay(j, "costs", {{"c", set(c.c)}, {"s", set(c.s)}});
}

json to_json(const ExperimentConfig& c) {
  return json{{"dgp", std::string(to_string(c.dgp))},
              {"mode", std::string(to_string(c.mode))},
              {"n", c.n},
              {"n_test", c.n_test},
              {"replications", c.replications},
              {"methods", c.methods},
              {"costs", to_json(c.costs)},
              {"m", c.m},
              {"grid_j", c.grid_j},
              {"saa_window", c.saa_window},
              {"oracle_mc", c.oracle_mc},
              {"seed", c.seed},
              {"cdgm", to_json(c.cdgm)},
              {"erm", to_json(c.erm)}};
}

void apply_json(const json& j, ExperimentConfig& c) {
  overlay(j, "experiment",
          {{"dgp", [&c](const json& v) { c.dgp = parse_dgp_kind(v.get<std::string>()); }},
           {"mode", [&c](const json& v) { c.mode = parse_price_mode(v.get<std::string>()); }},
           {"n", set_size(c.n)},
           {"n_test", set_size(c.n_test)},
           {"replications", set(c.replications)},
           {"methods", set(c.methods)},
           {"costs", [&c](const json& v) { apply_json(v, c.costs); }},
           {"m", set_size(c.m)},
           {"grid_j", set(c.grid_j)},
           {"saa_window", set(c.saa_window)},
           {"oracle_mc", set_size(c.oracle_mc)},
           {"seed", set(c.seed)},
           {"cdgm", [&c](const json& v) { apply_json(v, c.cdgm); }},
           {"erm", [&c](const json& v) { apply_json(v, c.erm); }}});
}

json to_json(const RealDataConfig& c) {
  json costs = json::array();
  for (const auto& cs : c.costs) costs.push_back({{"c", cs.c}, {"s", cs.s}});
  return json{{"meals", c.meals},   {"split_week", c.split_week}, {"methods", c.methods},
              {"costs", costs},     {"m", c.m},                   {"seed", c.seed},
              {"cdgm", to_json(c.cdgm)}, {"erm", to_json(c.erm)}};
}

void apply_json(const json& j, RealDataConfig& c) {
  overlay(j, "real_data",
          {{"meals", set(c.meals)},
           {"split_week", set(c.split_week)},
           {"methods", set(c.methods)},
           {"costs",
            [&c](const json& v) {
              if (!v.is_array()) throw Error(ErrorKind::config, "real_data.costs: expected an array");
              c.costs.clear();
              for (const auto& item : v) {
                CostParams p;
                apply_json(item, p);
                c.costs.push_back({p.c, p.s});
              }
            }},
           {"m", set_size(c.m)},
           {"seed", set(c.seed)},
           {"cdgm", [&c](const json& v) { apply_json(v, c.cdgm); }},
           {"erm", [&c](const json& v) { apply_json(v, c.erm); }}});
}

}  // namespace gennv
