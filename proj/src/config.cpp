// SPDX-License-Identifier: Apache-2.0
//
// pingpong: active sensing simulation for reciprocal MIMO channels
// Copyright (C) 2026 The pingpong Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "pingpong/config.hpp"

#include <fstream>
#include <sstream>

namespace pingpong {

using nlohmann::json;

json default_config() {
    return json::parse(R"({
  "seed": 1,
  "threads": 1,
  "model": {
    "mode": "digital",
    "m_t": 16,
    "m_r": 16,
    "n_s": 2,
    "n_rf": 0,
    "hidden": 64,
    "dnn_width": 128,
    "n_f": 16,
    "channel": "rayleigh",
    "paths": 4
  },
  "train": {
    "l": 6,
    "snr_db": 0.0,
    "batch_size": 128,
    "valid_size": 256,
    "lr": 0.001,
    "lr_floor": 0.00001,
    "lr_decay": 0.5,
    "patience": 5,
    "max_iterations": 2000,
    "eval_every": 50,
    "loss": "multi_round",
    "max_seconds": 0.0,
    "init_checkpoint": "",
    "output_dir": "train_out"
  },
  "bench": {
    "methods": ["perfect_csi", "power_iteration", "summed_power", "lmmse_svd"],
    "snr_db": [0.0],
    "rounds": [1, 2, 4, 6],
    "episodes": 1000,
    "checkpoints": {},
    "output": "bench.csv",
    "data_snr_db": null,
    "grid_size": 64
  },
  "inspect": {
    "method": "active_sensing",
    "l": 6,
    "snr_db": -5.0,
    "channel_index": 0,
    "side": "tx",
    "output": "inspect.csv"
  }
})");
}

namespace {

[[noreturn]] void config_error(const std::string &msg) { throw Error(ErrorCode::ConfigError, msg); }

bool compatible(const json &def, const json &v) {
    if (def.is_null())
        return v.is_null() || v.is_number();
    if (def.is_number_float())
        return v.is_number();
    if (def.is_number_unsigned() || def.is_number_integer())
        return v.is_number_integer() && (!def.is_number_unsigned() || v.get<long long>() >= 0);
    if (def.is_boolean())
        return v.is_boolean();
    if (def.is_string())
        return v.is_string();
    if (def.is_array()) {
        if (!v.is_array())
            return false;
        if (def.empty())
            return true;
        for (const auto &x : v)
            if (!compatible(def.front(), x))
                return false;
        return true;
    }
    return false;
}

} // namespace

void merge_checked(json &base, const json &patch, const std::string &prefix) {
    if (!patch.is_object())
        config_error("configuration " + (prefix.empty() ? std::string("root") : prefix) + " must be an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        // checkpoint maps are free-form: method name -> path
        if (prefix == "bench.checkpoints") {
            if (!it.value().is_string())
                config_error("key " + key + " must be a string path");
            base[it.key()] = it.value();
            continue;
        }
        if (!base.contains(it.key()))
            config_error("unknown key " + key);
        json &slot = base[it.key()];
        if (slot.is_object()) {
            merge_checked(slot, it.value(), key);
            continue;
        }
        if (!compatible(slot, it.value()))
            config_error("key " + key + " expects " + std::string(slot.type_name()) + ", got " +
                         std::string(it.value().type_name()));
        slot = it.value();
    }
}

void apply_override(json &cfg, const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        config_error("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception &) {
        value = raw;
    }
    json patch = value;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '.');) {
        if (p.empty())
            config_error("override key '" + key + "' has an empty component");
        parts.push_back(p);
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it)
        patch = json{{*it, patch}};
    merge_checked(cfg, patch);
}

json resolve_config(const std::optional<std::string> &path, const std::vector<std::string> &overrides,
                    const char *env_seed) {
    json cfg = default_config();
    if (path) {
        std::ifstream f(*path);
        if (!f)
            config_error("cannot read config file " + *path);
        json file;
        try {
            file = json::parse(f);
        } catch (const json::exception &e) {
            config_error("config file " + *path + ": " + e.what());
        }
        merge_checked(cfg, file);
    }
    for (const auto &o : overrides)
        apply_override(cfg, o);
    if (env_seed && *env_seed) {
        try {
            std::size_t used = 0;
            const unsigned long long s = std::stoull(env_seed, &used);
            if (used != std::string(env_seed).size())
                throw std::invalid_argument("trailing characters");
            cfg["seed"] = s;
        } catch (const std::exception &) {
            config_error(std::string("PINGPONG_SEED is not an unsigned integer: ") + env_seed);
        }
    }
    return cfg;
}

namespace {

Mode mode_from(const std::string &s) {
    if (s == "digital")
        return Mode::Digital;
    if (s == "hybrid")
        return Mode::Hybrid;
    config_error("model.mode must be digital or hybrid, got " + s);
}

ChannelModel channel_from(const std::string &s) {
    if (s == "rayleigh")
        return ChannelModel::Rayleigh;
    if (s == "mmwave")
        return ChannelModel::SparseMmWave;
    config_error("model.channel must be rayleigh or mmwave, got " + s);
}

} // namespace

ModelDims model_dims_from(const json &cfg) {
    const json &m = cfg.at("model");
    ModelDims d;
    d.mode = mode_from(m.at("mode").get<std::string>());
    d.m_t = m.at("m_t").get<std::size_t>();
    d.m_r = m.at("m_r").get<std::size_t>();
    d.n_s = m.at("n_s").get<std::size_t>();
    d.n_rf = m.at("n_rf").get<std::size_t>();
    d.hidden = m.at("hidden").get<std::size_t>();
    d.width = m.at("dnn_width").get<std::size_t>();
    d.n_f = m.at("n_f").get<std::size_t>();
    return d;
}

TrainConfig train_config_from(const json &cfg) {
    const json &t = cfg.at("train");
    TrainConfig c;
    c.dims = model_dims_from(cfg);
    c.channel = channel_from(cfg.at("model").at("channel").get<std::string>());
    c.paths = cfg.at("model").at("paths").get<std::size_t>();
    c.l = t.at("l").get<std::size_t>();
    c.snr_db = t.at("snr_db").get<double>();
    c.batch_size = t.at("batch_size").get<std::size_t>();
    c.valid_size = t.at("valid_size").get<std::size_t>();
    c.lr = t.at("lr").get<double>();
    c.lr_floor = t.at("lr_floor").get<double>();
    c.lr_decay = t.at("lr_decay").get<double>();
    c.patience = t.at("patience").get<std::size_t>();
    c.max_iterations = t.at("max_iterations").get<std::size_t>();
    c.eval_every = t.at("eval_every").get<std::size_t>();
    const std::string loss = t.at("loss").get<std::string>();
    if (loss != "multi_round" && loss != "final_round")
        config_error("train.loss must be multi_round or final_round, got " + loss);
    c.multi_round = loss == "multi_round";
    c.max_seconds = t.at("max_seconds").get<double>();
    c.init_checkpoint = t.at("init_checkpoint").get<std::string>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.threads = cfg.at("threads").get<std::size_t>();
    validate(c);
    return c;
}

BenchmarkConfig bench_config_from(const json &cfg) {
    const json &b = cfg.at("bench");
    const ModelDims d = model_dims_from(cfg);
    BenchmarkConfig c;
    c.methods = b.at("methods").get<std::vector<std::string>>();
    c.m_t = d.m_t;
    c.m_r = d.m_r;
    c.n_s = d.n_s;
    c.n_rf = d.n_rf;
    c.channel = channel_from(cfg.at("model").at("channel").get<std::string>());
    c.paths = cfg.at("model").at("paths").get<std::size_t>();
    c.snr_db = b.at("snr_db").get<std::vector<double>>();
    c.rounds = b.at("rounds").get<std::vector<std::size_t>>();
    c.episodes = b.at("episodes").get<std::size_t>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.checkpoints = b.at("checkpoints").get<std::map<std::string, std::string>>();
    c.output = b.at("output").get<std::string>();
    if (!b.at("data_snr_db").is_null())
        c.data_snr_db = b.at("data_snr_db").get<double>();
    c.grid_size = b.at("grid_size").get<std::size_t>();
    c.threads = cfg.at("threads").get<std::size_t>();
    if (c.episodes < 1)
        config_error("bench.episodes must be at least 1");
    if (c.grid_size < 1)
        config_error("bench.grid_size must be at least 1");
    if (c.m_t < 1 || c.m_r < 1 || c.n_s < 1 || c.n_s > std::min(c.m_t, c.m_r))
        config_error("model dimensions are inconsistent");
    for (const auto &m : c.methods) {
        const auto &known = known_methods();
        if (std::find(known.begin(), known.end(), m) == known.end() && !is_learned_method(m))
            config_error("unknown method " + m);
        if (is_learned_method(m) && !c.checkpoints.count(m))
            config_error("method " + m + " needs bench.checkpoints." + m);
    }
    return c;
}

} // namespace pingpong
