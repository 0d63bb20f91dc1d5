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

#include "pingpong/training.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace pingpong {

using ad::CTensor;
using ad::Tape;
using ad::Tensor;
using nlohmann::json;

namespace {

constexpr char kMagic[] = "PINGPONGCKPT\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

json dims_to_json(const ModelDims &d) {
    return {{"mode", d.mode == Mode::Digital ? "digital" : "hybrid"},
            {"m_t", d.m_t},
            {"m_r", d.m_r},
            {"n_s", d.n_s},
            {"n_rf", d.n_rf},
            {"hidden", d.hidden},
            {"dnn_width", d.width},
            {"n_f", d.n_f}};
}

ModelDims dims_from_json(const json &j) {
    ModelDims d;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "digital" && mode != "hybrid")
        throw Error(ErrorCode::CorruptFile, "unknown mode " + mode);
    d.mode = mode == "digital" ? Mode::Digital : Mode::Hybrid;
    d.m_t = j.at("m_t").get<std::size_t>();
    d.m_r = j.at("m_r").get<std::size_t>();
    d.n_s = j.at("n_s").get<std::size_t>();
    d.n_rf = j.at("n_rf").get<std::size_t>();
    d.hidden = j.at("hidden").get<std::size_t>();
    d.width = j.at("dnn_width").get<std::size_t>();
    d.n_f = j.at("n_f").get<std::size_t>();
    return d;
}

template <class T> void put(std::string &out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string &s, std::size_t end) : s_(s), end_(end) {}
    template <class T> T get() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (n > end_ - pos_)
            throw Error(ErrorCode::CorruptFile, "checkpoint truncated");
    }
    const std::string &s_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

// NaN is stored as null.
double number(const json &j) { return j.is_null() ? std::nan("") : j.get<double>(); }

std::uint64_t checksum(const std::string &s, std::size_t n) {
    return fnv1a(std::string_view(s.data(), n));
}

} // namespace

void validate(const TrainConfig &c) {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::ConfigError, m); };
    const ModelDims &d = c.dims;
    if (d.m_t < 1 || d.m_r < 1 || d.n_s < 1 || d.hidden < 1 || d.width < 1)
        fail("model dimensions must be positive");
    if (d.n_s > std::min(d.m_t, d.m_r))
        fail("model.n_s exceeds the array size");
    if (d.mode == Mode::Hybrid && (d.n_rf < d.n_s || d.n_rf > std::min(d.m_t, d.m_r) || d.n_f < 1))
        fail("hybrid mode needs n_s <= n_rf <= min(m_t, m_r) and n_f >= 1");
    if (d.n_s > 4)
        fail("model.n_s above 4 is not supported by the trainable determinant");
    if (c.l < 1)
        fail("train.l must be at least 1");
    if (c.batch_size < 1 || c.valid_size < 1)
        fail("batch and validation sizes must be positive");
    if (!(c.lr > 0.0) || !(c.lr_floor > 0.0) || c.lr_floor > c.lr)
        fail("learning rates must satisfy 0 < lr_floor <= lr");
    if (!(c.lr_decay > 0.0 && c.lr_decay < 1.0))
        fail("train.lr_decay must lie in (0, 1)");
    if (c.eval_every < 1 || c.patience < 1)
        fail("eval_every and patience must be positive");
    if (c.channel == ChannelModel::SparseMmWave && c.paths < 1)
        fail("mmWave channels need at least one path");
    if (c.threads < 1)
        fail("threads must be positive");
}

// ---- checkpoints ------------------------------------------------------------------

std::string serialize_checkpoint(const Checkpoint &c) {
    json header;
    header["model"] = dims_to_json(c.dims);
    header["config"] = json::parse(c.config_json.empty() ? "{}" : c.config_json);
    json hist = json::array();
    for (const auto &h : c.history)
        hist.push_back({h.iteration, h.train_loss, h.valid_loss, h.valid_objective, h.lr, h.skipped});
    header["history"] = hist;
    const std::string hs = header.dump();

    std::string out(kMagic, kMagicLen);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, hs.size());
    out += hs;
    std::vector<const ad::Parameter *> arrays;
    for (const auto *p : c.a.params())
        arrays.push_back(p);
    for (const auto *p : c.b.params())
        arrays.push_back(p);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto *p : arrays) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out += p->name;
        put<std::uint64_t>(out, p->rows);
        put<std::uint64_t>(out, p->cols);
        for (double v : p->value)
            put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    put<std::uint64_t>(out, checksum(out, out.size()));
    return out;
}

Checkpoint parse_checkpoint(const std::string &bytes) {
    if (bytes.size() < kMagicLen + 4 + 8 + 4 + 8 || bytes.compare(0, kMagicLen, kMagic) != 0)
        throw Error(ErrorCode::CorruptFile, "not a checkpoint file");
    const std::size_t body = bytes.size() - 8;
    Reader tail(bytes, bytes.size());
    tail.bytes(body);
    const std::uint64_t stored = tail.get<std::uint64_t>();
    Reader r(bytes, body);
    r.bytes(kMagicLen);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw Error(ErrorCode::VersionMismatch,
                    "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
    if (stored != checksum(bytes, body))
        throw Error(ErrorCode::CorruptFile, "checksum mismatch");
    const auto hlen = r.get<std::uint64_t>();
    if (hlen > body)
        throw Error(ErrorCode::CorruptFile, "header length out of range");
    json header;
    try {
        header = json::parse(r.bytes(hlen));
    } catch (const json::exception &e) {
        throw Error(ErrorCode::CorruptFile, std::string("bad header: ") + e.what());
    }
    Checkpoint c;
    try {
        c.dims = dims_from_json(header.at("model"));
        c.config_json = header.at("config").dump();
        for (const auto &h : header.at("history"))
            c.history.push_back({h.at(0).get<std::size_t>(), number(h.at(1)), number(h.at(2)), number(h.at(3)),
                                 number(h.at(4)), h.at(5).get<std::size_t>()});
    } catch (const json::exception &e) {
        throw Error(ErrorCode::CorruptFile, std::string("bad header: ") + e.what());
    }
    c.a = AgentParams(c.dims.agent(Role::A));
    c.b = AgentParams(c.dims.agent(Role::B));
    std::map<std::string, ad::Parameter *> by_name;
    for (auto *p : c.a.params())
        by_name[p->name] = p;
    for (auto *p : c.b.params())
        by_name[p->name] = p;
    const auto n = r.get<std::uint32_t>();
    if (n != by_name.size())
        throw Error(ErrorCode::CorruptFile, "array count " + std::to_string(n) + " does not match the model");
    for (std::uint32_t k = 0; k < n; ++k) {
        const auto len = r.get<std::uint32_t>();
        const std::string name = r.bytes(len);
        const auto rows = r.get<std::uint64_t>();
        const auto cols = r.get<std::uint64_t>();
        auto it = by_name.find(name);
        if (it == by_name.end() || it->second->rows != rows || it->second->cols != cols)
            throw Error(ErrorCode::CorruptFile, "unexpected array " + name);
        for (auto &v : it->second->value)
            v = std::bit_cast<double>(r.get<std::uint64_t>());
        by_name.erase(it);
    }
    if (r.pos() != body)
        throw Error(ErrorCode::CorruptFile, "trailing bytes after arrays");
    return c;
}

void save_checkpoint(const Checkpoint &c, const std::string &path) {
    const std::string bytes = serialize_checkpoint(c);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error(ErrorCode::ConfigError, "cannot write " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw Error(ErrorCode::ConfigError, "short write to " + path);
}

Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::ConfigError, "cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_checkpoint(ss.str());
}

Checkpoint initial_checkpoint(const ModelDims &dims, std::uint64_t seed) {
    Checkpoint c;
    c.dims = dims;
    c.a = AgentParams(dims.agent(Role::A));
    c.b = AgentParams(dims.agent(Role::B));
    Rng ra = make_rng(seed, "init", 0), rb = make_rng(seed, "init", 1);
    initialize(c.a, ra);
    initialize(c.b, rb);
    c.config_json = "{}";
    return c;
}

std::vector<ChannelMatrix> sample_channels(ChannelModel model, std::size_t m_r, std::size_t m_t, std::size_t paths,
                                           std::size_t count, Rng &rng) {
    std::vector<ChannelMatrix> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(model == ChannelModel::Rayleigh ? rayleigh_channel(m_r, m_t, rng)
                                                      : mmwave_channel(m_r, m_t, paths, rng));
    return out;
}

// ---- unrolled episode ------------------------------------------------------------------

namespace {

// Per-stream B x rows noise columns, one matrix draw per episode.
std::vector<CTensor> noise_columns(Tape &tape, std::size_t batch, std::size_t rows, std::size_t n_s, double var,
                                   Rng &rng) {
    std::vector<std::vector<double>> re(n_s, std::vector<double>(batch * rows)), im = re;
    for (std::size_t b = 0; b < batch; ++b) {
        const ComplexMatrix n = sample_complex_gaussian(rows, n_s, var, rng);
        for (std::size_t i = 0; i < n_s; ++i)
            for (std::size_t r = 0; r < rows; ++r) {
                re[i][b * rows + r] = n(r, i).real();
                im[i][b * rows + r] = n(r, i).imag();
            }
    }
    std::vector<CTensor> out;
    for (std::size_t i = 0; i < n_s; ++i)
        out.push_back({tape.constant(batch, rows, std::move(re[i])), tape.constant(batch, rows, std::move(im[i]))});
    return out;
}

struct Link {
    CTensor g; // B x (m_r m_t)
    std::size_t m_r, m_t;
};

// Overall transmitted columns (B x M) of a batch beamformer.
std::vector<CTensor> overall_columns(const BatchBeamformer &w, std::size_t m, std::size_t n_rf) {
    if (!w.hybrid)
        return w.digital;
    std::vector<CTensor> out;
    for (const auto &d : w.digital)
        out.push_back(ad::cbatched_matvec(w.analog, d, m, n_rf, false));
    return out;
}

std::vector<CTensor> transmit(Tape &tape, const Link &link, bool a_to_b, const BatchBeamformer &w,
                              const AgentRun &receiver, const ModelDims &dims, double var, Rng &rng) {
    const std::size_t batch = receiver.batch();
    const std::size_t m_in = a_to_b ? link.m_t : link.m_r, m_out = a_to_b ? link.m_r : link.m_t;
    const auto cols = overall_columns(w, m_in, dims.n_rf);
    const auto noise = noise_columns(tape, batch, m_out, cols.size(), var, rng);
    std::vector<CTensor> y;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        CTensor v = ad::cadd(ad::cbatched_matvec(link.g, cols[i], link.m_r, link.m_t, !a_to_b), noise[i]);
        if (dims.mode == Mode::Hybrid)
            v = ad::cbatched_matvec(receiver.receive_analog(), v, m_out, dims.n_rf, true);
        y.push_back(v);
    }
    return y;
}

// B x 1 log|det(W_r^H G W_t)|^2 with the floor, plus |det|^2 values.
Tensor round_objective(const Link &link, const BatchBeamformer &wt, const BatchBeamformer &wr,
                       const ModelDims &dims) {
    const auto t = overall_columns(wt, link.m_t, dims.n_rf);
    const auto r = overall_columns(wr, link.m_r, dims.n_rf);
    std::vector<CTensor> gt;
    for (const auto &c : t)
        gt.push_back(ad::cbatched_matvec(link.g, c, link.m_r, link.m_t, false));
    std::vector<std::vector<CTensor>> e(r.size(), std::vector<CTensor>(t.size()));
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j)
            e[i][j] = ad::cinner(r[i], gt[j]);
    return ad::logdet_abs_sq_diff(e);
}

} // namespace

LossTerms episode_objectives(Tape &tape, AgentParams &a, AgentParams &b, const std::vector<ChannelMatrix> &g,
                             std::size_t l, const NoiseSpec &noise, Rng &rng, const LossOptions &opt) {
    if (g.empty())
        throw Error(ErrorCode::DimensionMismatch, "empty channel batch");
    if (l < 1)
        throw Error(ErrorCode::DimensionMismatch, "an episode needs at least one round");
    ModelDims dims;
    dims.mode = a.dims.mode;
    dims.n_rf = a.dims.n_rf;
    const std::size_t batch = g.size();
    Link link{{}, g.front().m_r(), g.front().m_t()};
    if (a.dims.m != link.m_t || b.dims.m != link.m_r || a.dims.n_s != b.dims.n_s || b.dims.mode != a.dims.mode)
        throw Error(ErrorCode::DimensionMismatch, "agents do not match the channel");
    {
        std::vector<double> re(batch * link.m_r * link.m_t), im(re.size());
        for (std::size_t k = 0; k < batch; ++k) {
            if (g[k].m_r() != link.m_r || g[k].m_t() != link.m_t)
                throw Error(ErrorCode::DimensionMismatch, "channel batch mixes shapes");
            for (std::size_t i = 0; i < link.m_r * link.m_t; ++i) {
                re[k * link.m_r * link.m_t + i] = g[k].g.data()[i].real();
                im[k * link.m_r * link.m_t + i] = g[k].g.data()[i].imag();
            }
        }
        link.g = {tape.constant(batch, link.m_r * link.m_t, std::move(re)),
                  tape.constant(batch, link.m_r * link.m_t, std::move(im))};
    }
    AgentRun ra(a, tape, batch, opt.track), rb(b, tape, batch, opt.track);
    BatchBeamformer sa = ra.initial_sensing();
    std::vector<Tensor> terms;
    for (std::size_t round = 0; round < l; ++round) {
        const auto yb = transmit(tape, link, true, sa, rb, dims, noise.sigma_b_sq, rng);
        const BatchBeamformer sb = rb.sensing_step(yb);
        const auto ya = transmit(tape, link, false, sb, ra, dims, noise.sigma_a_sq, rng);
        sa = ra.sensing_step(ya);
        if (opt.multi_round || round + 1 == l)
            terms.push_back(round_objective(link, ra.final_beamformer(), rb.final_beamformer(), dims));
    }
    Tensor total = terms.front();
    for (std::size_t k = 1; k < terms.size(); ++k)
        total = ad::add(total, terms[k]);

    LossTerms out;
    const double floor_log = std::log(kLogDetFloor);
    std::vector<double> mask(batch, 1.0);
    for (std::size_t s = 0; s < batch; ++s) {
        out.final_objective.push_back(terms.back().at(s, 0));
        out.total_objective.push_back(total.at(s, 0));
        if (opt.mask_near_singular)
            for (const auto &t : terms)
                if (t.at(s, 0) <= floor_log)
                    mask[s] = 0.0;
        if (mask[s] > 0.0)
            ++out.used;
        else
            ++out.skipped;
    }
    out.masked_sum = ad::sum(ad::mul(total, tape.constant(batch, 1, std::move(mask))));
    return out;
}

Tensor episode_loss(Tape &tape, AgentParams &a, AgentParams &b, const std::vector<ChannelMatrix> &g, std::size_t l,
                    const NoiseSpec &noise, Rng &rng, const LossOptions &opt) {
    LossTerms t = episode_objectives(tape, a, b, g, l, noise, rng, opt);
    if (t.used == 0)
        return ad::scale(t.masked_sum, 0.0);
    return ad::scale(t.masked_sum, -1.0 / static_cast<double>(t.used));
}

std::pair<double, double> evaluate_loss(AgentParams &a, AgentParams &b, const std::vector<ChannelMatrix> &g,
                                        std::size_t l, const NoiseSpec &noise, std::uint64_t noise_seed,
                                        std::size_t chunk, bool multi_round) {
    Rng rng(noise_seed);
    double total = 0.0, fin = 0.0;
    LossOptions opt;
    opt.multi_round = multi_round;
    opt.mask_near_singular = false;
    opt.track = false;
    for (std::size_t start = 0; start < g.size(); start += chunk) {
        const std::size_t n = std::min(chunk, g.size() - start);
        std::vector<ChannelMatrix> part(g.begin() + static_cast<std::ptrdiff_t>(start),
                                        g.begin() + static_cast<std::ptrdiff_t>(start + n));
        Tape tape;
        const LossTerms t = episode_objectives(tape, a, b, part, l, noise, rng, opt);
        for (std::size_t s = 0; s < n; ++s) {
            total += t.total_objective[s];
            fin += t.final_objective[s];
        }
    }
    const double n = static_cast<double>(g.size());
    return {-total / n, fin / n};
}

// ---- training loop ----------------------------------------------------------------------

namespace {

struct StepOutcome {
    double loss_sum = 0.0; // sum over kept samples of the summed objectives
    std::size_t used = 0;
    std::size_t skipped = 0;
    bool failed = false;
};

StepOutcome gradient_step(AgentParams &a, AgentParams &b, const std::vector<ChannelMatrix> &g, const TrainConfig &c,
                          const NoiseSpec &noise, std::uint64_t iter_seed) {
    const std::size_t chunks = std::min(c.threads, g.size());
    std::vector<std::unique_ptr<Tape>> tapes(chunks);
    std::vector<LossTerms> terms(chunks);
    std::vector<std::string> errors(chunks);
    auto work = [&](std::size_t k) {
        const std::size_t lo = g.size() * k / chunks, hi = g.size() * (k + 1) / chunks;
        std::vector<ChannelMatrix> part(g.begin() + static_cast<std::ptrdiff_t>(lo),
                                        g.begin() + static_cast<std::ptrdiff_t>(hi));
        Rng rng = make_rng(iter_seed, "noise", k);
        tapes[k] = std::make_unique<Tape>();
        try {
            LossOptions opt;
            opt.multi_round = c.multi_round;
            terms[k] = episode_objectives(*tapes[k], a, b, part, c.l, noise, rng, opt);
            tapes[k]->backward(terms[k].masked_sum);
        } catch (const Error &e) {
            errors[k] = e.what();
        }
    };
    if (chunks == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < chunks; ++k)
            pool.emplace_back(work, k);
        for (auto &t : pool)
            t.join();
    }
    StepOutcome out;
    for (std::size_t k = 0; k < chunks; ++k) {
        if (!errors[k].empty()) {
            out.failed = true;
            out.skipped += g.size();
            return out;
        }
        out.used += terms[k].used;
        out.skipped += terms[k].skipped;
        out.loss_sum += terms[k].masked_sum.item();
    }
    if (out.used == 0 || !std::isfinite(out.loss_sum)) {
        out.failed = true;
        return out;
    }
    for (auto *p : a.params())
        p->zero_grad();
    for (auto *p : b.params())
        p->zero_grad();
    // d(-sum / used) = -(1 / used) d(sum)
    for (auto &t : tapes)
        t->flush_param_grads(-1.0 / static_cast<double>(out.used));
    return out;
}

bool all_grads_finite(AgentParams &a, AgentParams &b) {
    for (auto *ps : {&a, &b})
        for (auto *p : ps->params())
            for (double v : p->grad)
                if (!std::isfinite(v))
                    return false;
    return true;
}

} // namespace

TrainResult train(const TrainConfig &c, const std::string &config_json, const HistoryCallback &cb) {
    validate(c);
    const auto t0 = std::chrono::steady_clock::now();
    Checkpoint cur = initial_checkpoint(c.dims, c.seed);
    if (!c.init_checkpoint.empty()) {
        Checkpoint init = load_checkpoint(c.init_checkpoint);
        if (!(init.dims == c.dims))
            throw Error(ErrorCode::ConfigError, "train.init_checkpoint dimensions differ from the model: " +
                                                    c.init_checkpoint);
        cur.a = std::move(init.a);
        cur.b = std::move(init.b);
    }
    cur.config_json = config_json;
    const NoiseSpec noise = NoiseSpec::from_snr_db(c.snr_db);

    Rng train_rng = make_rng(c.seed, "train-channels", 0);
    Rng valid_rng = make_rng(c.seed, "valid-channels", 0);
    const std::uint64_t valid_noise = derive_seed(c.seed, "valid-noise", 0);
    const auto valid = sample_channels(c.channel, c.dims.m_r, c.dims.m_t, c.paths, c.valid_size, valid_rng);

    std::vector<ad::Parameter *> params = cur.a.params();
    for (auto *p : cur.b.params())
        params.push_back(p);
    ad::AdamState adam;
    adam.lr = c.lr;

    TrainResult res;
    double best = std::numeric_limits<double>::infinity();
    std::size_t bad = 0, skipped = 0;
    double train_acc = 0.0;
    std::size_t train_n = 0;
    bool stop = false;

    auto evaluate = [&](std::size_t it) {
        const auto [vl, vo] = evaluate_loss(cur.a, cur.b, valid, c.l, noise, valid_noise, c.batch_size, c.multi_round);
        HistoryEntry h{it, train_n ? train_acc / static_cast<double>(train_n) : std::nan(""), vl, vo, adam.lr, skipped};
        train_acc = 0.0;
        train_n = 0;
        res.history.push_back(h);
        if (cb)
            cb(h);
        if (vl < best) {
            best = vl;
            bad = 0;
            res.best = cur;
        } else if (++bad >= c.patience) {
            bad = 0;
            if (adam.lr <= c.lr_floor)
                stop = true;
            adam.lr = std::max(adam.lr * c.lr_decay, c.lr_floor);
        }
    };

    evaluate(0);
    std::size_t it = 0;
    while (it < c.max_iterations && !stop) {
        if (c.max_seconds > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > c.max_seconds)
            break;
        const auto batch = sample_channels(c.channel, c.dims.m_r, c.dims.m_t, c.paths, c.batch_size, train_rng);
        const StepOutcome s = gradient_step(cur.a, cur.b, batch, c, noise, derive_seed(c.seed, "train-noise", it));
        ++it;
        skipped += s.skipped;
        if (!s.failed && all_grads_finite(cur.a, cur.b)) {
            ad::adam_step(params, adam);
            train_acc += -s.loss_sum / static_cast<double>(s.used);
            ++train_n;
        }
        if (it % c.eval_every == 0)
            evaluate(it);
    }
    if (it % c.eval_every != 0)
        evaluate(it);
    res.iterations = it;
    res.best.history = res.history;
    res.best.config_json = config_json;
    return res;
}

void write_history_csv(const std::vector<HistoryEntry> &h, std::ostream &out) {
    out << "iteration,train_loss,valid_loss,valid_objective,lr,skipped\n";
    out << std::setprecision(17);
    for (const auto &e : h)
        out << e.iteration << ',' << e.train_loss << ',' << e.valid_loss << ',' << e.valid_objective << ',' << e.lr
            << ',' << e.skipped << '\n';
}

} // namespace pingpong
