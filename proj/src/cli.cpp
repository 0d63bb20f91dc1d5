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

#include "pingpong/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "pingpong/config.hpp"

namespace pingpong {

namespace {

namespace fs = std::filesystem;
using ad::CTensor;
using ad::Parameter;
using ad::Tape;
using ad::Tensor;

// ---- gradient-check suite -------------------------------------------------------------

std::vector<double> normals(std::size_t n, Rng &rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    std::vector<double> v(n);
    for (auto &x : v)
        x = d(rng);
    return v;
}

void fill(Parameter &p, Rng &rng, double sd = 1.0) { p.value = normals(p.size(), rng, sd); }

Tensor weighted_sum(Tape &tape, const Tensor &t, Rng &rng) {
    return ad::sum(ad::mul(t, tape.constant(t.rows(), t.cols(), normals(t.size(), rng))));
}

/// Wraps a tape-building closure as a grad_check loss; the closure must be
/// deterministic so the finite differences see the same function every time.
template <class Build>
ad::LossFn tape_loss(const std::vector<Parameter *> &params, Build build) {
    return [params, build](bool with_grad) {
        Tape tape;
        const Tensor loss = build(tape);
        if (with_grad) {
            for (auto *p : params)
                p->zero_grad();
            tape.backward(loss);
            tape.flush_param_grads();
        }
        return loss.item();
    };
}

GradCheckEntry check(const std::string &name, const std::vector<Parameter *> &params, const ad::LossFn &fn,
                     std::uint64_t seed) {
    ad::GradCheckOptions opt;
    opt.seed = seed;
    const ad::GradCheckReport r = ad::grad_check(fn, params, opt);
    return {name, r.max_rel_error, r.coords_checked};
}

GradCheckEntry check_unrolled(const std::string &name, Mode mode, std::uint64_t seed) {
    ModelDims dims;
    dims.mode = mode;
    dims.m_t = 4;
    dims.m_r = 4;
    dims.n_s = 2;
    dims.n_rf = mode == Mode::Hybrid ? 2 : 0;
    dims.hidden = 8;
    dims.width = 8;
    dims.n_f = 4;
    auto ck = std::make_shared<Checkpoint>(initial_checkpoint(dims, seed));
    Rng crng = make_rng(seed, "gradcheck-channels");
    const auto g = sample_channels(ChannelModel::Rayleigh, 4, 4, 0, 4, crng);
    const NoiseSpec noise = NoiseSpec::from_snr_db(10.0);
    std::vector<Parameter *> params = ck->a.params();
    for (auto *p : ck->b.params())
        params.push_back(p);
    LossOptions lo;
    lo.mask_near_singular = false;
    auto fn = tape_loss(params, [ck, g, noise, seed, lo](Tape &tape) {
        Rng nrng = make_rng(seed, "gradcheck-noise");
        return episode_loss(tape, ck->a, ck->b, g, 2, noise, nrng, lo);
    });
    return check(name, params, fn, seed);
}

} // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed) {
    std::vector<GradCheckEntry> out;
    const std::size_t batch = 4;

    {
        auto gru = std::make_shared<GruParams>("gru", 6, 8);
        Rng rng = make_rng(seed, "gradcheck-gru");
        for (auto *p : gru->params())
            fill(*p, rng, 0.5);
        const auto x = normals(batch * 6, rng), h = normals(batch * 8, rng);
        auto fn = tape_loss(gru->params(), [gru, x, h, seed](Tape &tape) {
            Rng w = make_rng(seed, "gradcheck-gru-w");
            const Tensor hn = gru_cell_forward(tape, *gru, tape.constant(batch, 8, h), tape.constant(batch, 6, x));
            return weighted_sum(tape, hn, w);
        });
        out.push_back(check("gru", gru->params(), fn, seed));
    }
    {
        auto net = std::make_shared<DenseParams>("dense", std::vector<std::size_t>{8, 8, 6});
        Rng rng = make_rng(seed, "gradcheck-dense");
        for (auto *p : net->params())
            fill(*p, rng, 0.5);
        const auto x = normals(batch * 8, rng);
        auto fn = tape_loss(net->params(), [net, x, seed](Tape &tape) {
            Rng w = make_rng(seed, "gradcheck-dense-w");
            return weighted_sum(tape, dense_forward(tape, *net, tape.constant(batch, 8, x)), w);
        });
        out.push_back(check("dense", net->params(), fn, seed));
    }
    {
        auto ps = std::make_shared<std::vector<Parameter>>();
        ps->emplace_back("a_re", 3, 4);
        ps->emplace_back("a_im", 3, 4);
        ps->emplace_back("b_re", 4, 2);
        ps->emplace_back("b_im", 4, 2);
        Rng rng = make_rng(seed, "gradcheck-cmatmul");
        std::vector<Parameter *> ptrs;
        for (auto &p : *ps) {
            fill(p, rng);
            ptrs.push_back(&p);
        }
        auto fn = tape_loss(ptrs, [ps, seed](Tape &tape) {
            Rng w = make_rng(seed, "gradcheck-cmatmul-w");
            auto &v = *ps;
            const CTensor c = ad::complex_matmul(tape.param(v[0]), tape.param(v[1]), tape.param(v[2]),
                                                 tape.param(v[3]));
            return ad::add(weighted_sum(tape, c.re, w), weighted_sum(tape, c.im, w));
        });
        out.push_back(check("complex_matmul", ptrs, fn, seed));
    }
    {
        auto ps = std::make_shared<std::vector<Parameter>>();
        for (const char *n : {"c0_re", "c0_im", "c1_re", "c1_im"})
            ps->emplace_back(n, batch, 4);
        Rng rng = make_rng(seed, "gradcheck-gs");
        std::vector<Parameter *> ptrs;
        for (auto &p : *ps) {
            fill(p, rng);
            ptrs.push_back(&p);
        }
        auto fn = tape_loss(ptrs, [ps, seed](Tape &tape) {
            Rng w = make_rng(seed, "gradcheck-gs-w");
            auto &v = *ps;
            const auto q = ad::differentiable_gram_schmidt(
                {{tape.param(v[0]), tape.param(v[1])}, {tape.param(v[2]), tape.param(v[3])}});
            Tensor loss = tape.constant(1, 1, 0.0);
            for (const auto &c : q)
                loss = ad::add(loss, ad::add(weighted_sum(tape, c.re, w), weighted_sum(tape, c.im, w)));
            return loss;
        });
        out.push_back(check("gram_schmidt", ptrs, fn, seed));
    }
    {
        // batch of 2x2 complex matrices, entry (i, j) in column 2i + j
        auto ps = std::make_shared<std::vector<Parameter>>();
        ps->emplace_back("m_re", batch, 4);
        ps->emplace_back("m_im", batch, 4);
        Rng rng = make_rng(seed, "gradcheck-logdet");
        std::vector<Parameter *> ptrs;
        for (auto &p : *ps) {
            fill(p, rng);
            ptrs.push_back(&p);
        }
        auto fn = tape_loss(ptrs, [ps](Tape &tape) {
            const Tensor re = tape.param((*ps)[0]), im = tape.param((*ps)[1]);
            std::vector<std::vector<CTensor>> e(2, std::vector<CTensor>(2));
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j)
                    e[i][j] = {ad::slice(re, 0, batch, 2 * i + j, 1), ad::slice(im, 0, batch, 2 * i + j, 1)};
            return ad::sum(ad::logdet_abs_sq_diff(e));
        });
        out.push_back(check("logdet", ptrs, fn, seed));
    }
    out.push_back(check_unrolled("digital_loss", Mode::Digital, seed));
    out.push_back(check_unrolled("hybrid_loss", Mode::Hybrid, seed));
    return out;
}

namespace {

// ---- subcommands ------------------------------------------------------------------------

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string output;
    int threads = 0;
    bool quiet = false;
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("-c,--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", c.overrides, "Override a configuration key: dotted.key=value")->take_all();
    cmd->add_option("-o,--output", c.output, "Output path (directory for train, file otherwise)");
    cmd->add_option("-t,--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("-q,--quiet", c.quiet, "Suppress progress lines");
}

nlohmann::json resolve(const Common &c) {
    std::vector<std::string> overrides = c.overrides;
    if (c.threads > 0)
        overrides.push_back("threads=" + std::to_string(c.threads));
    return resolve_config(c.config.empty() ? std::nullopt : std::optional<std::string>(c.config), overrides,
                          std::getenv("PINGPONG_SEED"));
}

std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%H:%M:%S");
    return s.str();
}

std::ofstream open_output(const std::string &path) {
    const fs::path p(path);
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::ConfigError, "cannot write " + path);
    return f;
}

int cmd_train(const Common &opt, std::ostream &out) {
    const nlohmann::json cfg = resolve(opt);
    const TrainConfig tc = train_config_from(cfg);
    const std::string dir = opt.output.empty() ? cfg.at("train").at("output_dir").get<std::string>() : opt.output;
    fs::create_directories(dir);
    const TrainResult r = train(tc, cfg.dump(), [&](const HistoryEntry &h) {
        if (opt.quiet)
            return;
        out << "[" << timestamp() << "] iter " << h.iteration << " train " << h.train_loss << " valid "
            << h.valid_loss << " objective " << h.valid_objective << " lr " << h.lr << " skipped " << h.skipped
            << std::endl;
    });
    const std::string ckpt = (fs::path(dir) / "checkpoint.ckpt").string();
    save_checkpoint(r.best, ckpt);
    std::ofstream hist = open_output((fs::path(dir) / "history.csv").string());
    write_history_csv(r.history, hist);
    if (!opt.quiet)
        out << "wrote " << ckpt << " after " << r.iterations << " iterations\n";
    return kExitOk;
}

int cmd_bench(const Common &opt, std::ostream &out) {
    nlohmann::json cfg = resolve(opt);
    if (!opt.output.empty())
        cfg["bench"]["output"] = opt.output;
    const BenchmarkConfig bc = bench_config_from(cfg);
    const BenchmarkResult r = run_benchmark(bc);
    if (!bc.output.empty()) {
        std::ofstream f = open_output(bc.output);
        write_csv(r.rows, f);
    }
    print_summary(r.summary, out);
    if (r.failures)
        out << r.failures << " episodes dropped after numeric failures\n";
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, const std::string &fault_op, double fault_factor, std::ostream &out) {
    ad::set_fault_injection(fault_op, fault_factor);
    std::vector<GradCheckEntry> entries;
    try {
        entries = run_gradcheck_suite(seed);
    } catch (...) {
        ad::set_fault_injection("");
        throw;
    }
    ad::set_fault_injection("");
    bool ok = true;
    out << std::left << std::setw(16) << "component" << std::setw(14) << "max_rel_err" << std::setw(8) << "coords"
        << "status\n";
    for (const auto &e : entries) {
        const bool pass = e.max_rel_error < kGradCheckTolerance;
        ok = ok && pass;
        out << std::left << std::setw(16) << e.component << std::setw(14) << std::scientific << std::setprecision(3)
            << e.max_rel_error << std::defaultfloat << std::setw(8) << e.coords << (pass ? "ok" : "FAIL") << "\n";
    }
    return ok ? kExitOk : kExitGradCheck;
}

int cmd_inspect(const Common &opt, const std::string &side_flag, const std::string &checkpoint, std::ostream &out) {
    nlohmann::json cfg = resolve(opt);
    nlohmann::json &ins = cfg["inspect"];
    if (!side_flag.empty())
        ins["side"] = side_flag;
    if (!opt.output.empty())
        ins["output"] = opt.output;
    const std::string method = ins.at("method").get<std::string>();
    if (!is_learned_method(method))
        throw Error(ErrorCode::ConfigError, "inspect.method must name a learned method, got " + method);
    if (!checkpoint.empty())
        cfg["bench"]["checkpoints"][method] = checkpoint;
    const std::string side_name = ins.at("side").get<std::string>();
    if (side_name != "tx" && side_name != "rx")
        throw Error(ErrorCode::ConfigError, "inspect.side must be tx or rx, got " + side_name);
    const Side side = side_name == "tx" ? Side::Tx : Side::Rx;

    cfg["bench"]["methods"] = {method, "power_iteration", "perfect_csi"};
    BenchmarkConfig bc = bench_config_from(cfg);
    const std::size_t l = ins.at("l").get<std::size_t>();
    const double snr = ins.at("snr_db").get<double>();
    const std::size_t index = ins.at("channel_index").get<std::size_t>();
    if (l < 1)
        throw Error(ErrorCode::ConfigError, "inspect.l must be at least 1");

    MethodRunner runner(bc);
    const ChannelMatrix g = benchmark_channel(bc, index);
    const std::uint64_t seed = episode_seed(bc, snr, l, index);
    const std::size_t k = side == Side::Tx ? bc.m_t : bc.m_r;

    std::ofstream f = open_output(ins.at("output").get<std::string>());
    f << "method,side,stream";
    for (std::size_t i = 1; i <= std::min(bc.m_t, bc.m_r) && i <= k; ++i)
        f << ",corr_" << i;
    f << "\n" << std::setprecision(17);
    for (const auto &m : bc.methods) {
        const MethodOutput r = runner.run(m, g, snr, l, seed);
        const ComplexMatrix w = overall_matrix(side == Side::Tx ? r.w_t : r.w_r);
        for (std::size_t s = 0; s < w.cols(); ++s) {
            const std::vector<double> prof = correlation_profile(w.col(s), g, side);
            f << m << "," << side_name << "," << s + 1;
            for (double v : prof)
                f << "," << v;
            f << "\n";
        }
    }
    if (!opt.quiet)
        out << "wrote " << ins.at("output").get<std::string>() << "\n";
    return kExitOk;
}

int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::VersionMismatch:
    case ErrorCode::CorruptFile:
        return kExitConfig;
    default:
        return kExitNumeric;
    }
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Ping-pong pilot sounding: training, benchmarking and diagnostics", "pingpong"};
    app.require_subcommand(1);

    Common train_opt, bench_opt, inspect_opt;
    CLI::App *train = app.add_subcommand("train", "Train learned agents and write checkpoint.ckpt + history.csv");
    add_common(train, train_opt);
    CLI::App *bench = app.add_subcommand("bench", "Run the Monte Carlo benchmark and write the result CSV");
    add_common(bench, bench_opt);

    CLI::App *gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable block");
    std::uint64_t gc_seed = 7;
    std::string fault_op;
    double fault_factor = 1.5;
    gradcheck->add_option("--seed", gc_seed, "Seed of the random test points");
    gradcheck->add_option("--fault-op", fault_op)->group("");
    gradcheck->add_option("--fault-factor", fault_factor)->group("");

    CLI::App *inspect = app.add_subcommand("inspect", "Correlation of the learned beamformers with the singular vectors");
    add_common(inspect, inspect_opt);
    std::string side, checkpoint;
    inspect->add_option("--side", side, "tx or rx")->check(CLI::IsMember({"tx", "rx"}));
    inspect->add_option("--checkpoint", checkpoint, "Checkpoint of the learned method");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed())
            return cmd_train(train_opt, out);
        if (bench->parsed())
            return cmd_bench(bench_opt, out);
        if (gradcheck->parsed())
            return cmd_gradcheck(gc_seed, fault_op, fault_factor, out);
        return cmd_inspect(inspect_opt, side, checkpoint, out);
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const nlohmann::json::exception &e) {
        err << "error: ConfigError: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fs::filesystem_error &e) {
        err << "error: ConfigError: " << e.what() << "\n";
        return kExitConfig;
    }
}

} // namespace pingpong
