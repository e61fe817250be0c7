#pragma once

// Command-line front end. Kept in a header so the test suite can drive it
// in-process.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aecomm/aecomm.hpp"

namespace aecomm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Directory for outputs when --output is not given.
inline std::filesystem::path default_output_dir()
{
    if (const char* env = std::getenv("AECOMM_OUTPUT_DIR"); env && *env) return env;
    return "results";
}

struct GlobalOptions {
    std::uint64_t seed = 1;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::string output;

    std::filesystem::path output_or(const std::string& file) const
    {
        return output.empty() ? default_output_dir() / file : std::filesystem::path(output);
    }
};

struct TrainOptions {
    std::string system = "siso";
    std::size_t n = 7;
    std::size_t k = 4;
    std::size_t batch = 256;
    double lr = 0.01;
    std::size_t iterations = 10000;
    std::optional<double> train_ebn0;
    double gamma = 0.5;
    std::string csi = "genie";
    std::string fading = "block";
    std::string channel = "rayleigh";
    std::vector<std::size_t> encoder_hidden;
    std::vector<std::size_t> decoder_hidden;
    std::size_t log_every = 1000;
};

struct SweepOptions {
    std::string link = "conv-siso-uncoded";
    std::string model;
    std::string channel = "rayleigh";
    std::string fading = "block";
    std::string hamming = "hard";
    std::vector<double> ebn0;
    std::optional<double> start, stop, step;
    std::uint64_t min_errors = 100;
    std::uint64_t max_bits = 10'000'000;
    bool plot_script = false;
};

struct BaselineOptions {
    std::string modulation = "bpsk";
    std::string code = "none";
    std::string channel = "awgn";
    double start = 0.0;
    double stop = 14.0;
    double step = 1.0;
};

struct GradcheckOptions {
    std::string system = "all";
    double epsilon = 1e-5;
    std::size_t batch = 8;
    double tolerance = 1e-5;
};

struct CodewordsOptions {
    std::string model;
};

namespace detail {

inline std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline nlohmann::json model_summary(const TrainedModel& m)
{
    return {{"system", to_json(m.system)}, {"train", to_json(m.train)}, {"gamma", m.gamma},
            {"csi_rx", to_string(m.csi())}, {"final_loss", std::isfinite(m.final_loss) ? nlohmann::json(m.final_loss)
                                                                                        : nlohmann::json(nullptr)}};
}

inline int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& out, std::ostream& err)
{
    const bool mimo = o.system == "mimo";
    SystemConfig sys;
    if (mimo) sys = {o.n, o.k, 2, 2};
    else sys = {o.n, o.k, 1, 1};

    MimoTrainConfig tc;
    tc.train_ebn0_db = mimo ? 10.0 : 6.0;
    tc.batch_size = o.batch;
    tc.learning_rate = o.lr;
    tc.iterations = o.iterations;
    if (o.train_ebn0) tc.train_ebn0_db = *o.train_ebn0;
    tc.seed = g.seed;
    tc.csi = parse_csi_mode(o.csi);
    tc.fading = parse_fading_mode(o.fading);
    tc.channel = parse_channel_mode(o.channel);
    tc.encoder_hidden = o.encoder_hidden;
    tc.decoder_hidden = o.decoder_hidden;
    tc.gamma = o.gamma;

    Rng rng(derive_seed(g.seed, {0x7EA1}));
    TrainedModel model;
    if (mimo) model = train_mimo(build_mimo_autoencoder(sys, tc), tc, rng);
    else model = train_siso(build_siso_autoencoder(sys, tc), tc, rng);

    if (o.log_every > 0)
        for (std::size_t i = 0; i < model.loss_history.size(); i += o.log_every)
            err << "iteration " << i << " loss " << model.loss_history[i] << '\n';

    const auto path = g.output_or("model.json");
    save_model(model, path);
    out << "trained " << (mimo ? "mimo" : "siso") << " (" << sys.n << "," << sys.k << ") final loss "
        << fmt(model.final_loss) << "\ncheckpoint " << path.string() << '\n';
    return kExitOk;
}

inline int cmd_sweep(const GlobalOptions& g, const SweepOptions& o, std::ostream& out, std::ostream& err)
{
    const LinkKind kind = parse_link_kind(o.link);
    const ChannelMode channel = parse_channel_mode(o.channel);
    SweepSpec spec;
    nlohmann::json meta;
    if (kind == LinkKind::AeSiso || kind == LinkKind::AeMimo) {
        if (o.model.empty()) throw ContractViolation("sweep: link " + o.link + " needs --model");
        auto model = std::make_shared<const TrainedModel>(load_model(o.model));
        spec.link = make_learned_link(model, channel);
        if (spec.link.kind != kind) throw ContractViolation("sweep: checkpoint does not hold a " + o.link + " model");
        meta["model"] = model_summary(*model);
        meta["model_path"] = o.model;
        meta["csi_rx"] = to_string(model->csi());
    }
    else {
        spec.link = make_conventional_link(kind, channel, parse_fading_mode(o.fading),
                                           o.hamming == "soft" ? HammingDecodeMode::SoftMl
                                                               : HammingDecodeMode::HardSyndrome);
        meta["csi_rx"] = "genie";
    }
    const bool mimo = kind == LinkKind::AeMimo || kind == LinkKind::ConvMimoMl || kind == LinkKind::ConvMimoZf;
    if (!o.ebn0.empty()) spec.ebn0_db = o.ebn0;
    else spec.ebn0_db = ebn0_grid(o.start.value_or(0.0), o.stop.value_or(mimo ? 20.0 : 14.0), o.step.value_or(2.0));
    spec.stop = StopRule{o.min_errors, o.max_bits};
    spec.seed = g.seed;
    spec.workers = g.workers;

    meta["link"] = spec.link.name();
    meta["channel"] = to_string(channel);
    meta["fading"] = to_string(spec.link.fading);
    meta["seed"] = g.seed;
    meta["stop"] = {{"min_errors", spec.stop.min_errors}, {"max_bits", spec.stop.max_bits}};
    meta["energy_rate"] = spec.link.energy_rate();

    const auto path = g.output_or("sweep.csv");
    auto finish = [&](const std::vector<BerPoint>& points) {
        nlohmann::json extra = nlohmann::json::array();
        for (const auto& p : points)
            extra.push_back({{"ebn0_db", p.ebn0_db},
                             {"seed", p.seed},
                             {"blocks", p.blocks},
                             {"block_errors", p.block_errors},
                             {"detection_failures", p.detection_failures}});
        meta["points"] = extra;
        write_results(make_rows(spec.link, points), meta, path, o.plot_script);
    };
    try {
        const auto points = run_sweep(spec, [&](std::size_t i, const BerPoint& p) {
            err << "[" << i + 1 << "/" << spec.ebn0_db.size() << "] " << spec.link.name() << " " << p.ebn0_db
                << " dB: ber " << p.ber << " (" << p.errors << "/" << p.bits << ")" << (p.censored ? " censored" : "")
                << '\n';
        });
        finish(points);
        out << "wrote " << points.size() << " points to " << path.string() << '\n';
    }
    catch (const SweepAborted& e) {
        meta["aborted"] = e.what();
        finish(e.partial);
        throw;
    }
    return kExitOk;
}

inline int cmd_baseline(const GlobalOptions& g, const BaselineOptions& o, std::ostream& out)
{
    const ChannelMode channel = parse_channel_mode(o.channel);
    if (o.code == "hamming74" && channel != ChannelMode::AwgnOnly)
        throw ContractViolation("baseline: the Hamming(7,4) closed form is for AWGN only");
    const auto path = g.output_or("baseline.csv");
    auto file = aecomm::detail::open_for_write(path);
    file << "curve,channel,ebn0_db,quantity,value\n";
    const std::string curve = o.code == "hamming74" ? "bpsk-hamming74-hard" : "bpsk-uncoded";
    for (double db : ebn0_grid(o.start, o.stop, o.step)) {
        double v;
        if (o.code == "hamming74") v = theory_bler_hamming74_hard_awgn(db);
        else if (channel == ChannelMode::AwgnOnly) v = theory_ber_bpsk_awgn(db);
        else v = theory_ber_bpsk_rayleigh(db);
        file << curve << ',' << to_string(channel) << ',' << fmt(db) << ',' << (o.code == "hamming74" ? "bler" : "ber")
             << ',' << fmt(v) << '\n';
    }
    if (!file) throw std::runtime_error("write failed for '" + path.string() + "'");
    out << "wrote " << path.string() << '\n';
    return kExitOk;
}

inline int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o, std::ostream& out)
{
    bool ok = true;
    auto check = [&](const char* label, const TrainedModel& model) {
        Rng rng(derive_seed(g.seed, {0x6C4E}));
        const double beta = autoencoder_noise(model.system, model.train.train_ebn0_db).beta;
        const auto batch =
            sample_batch(model, o.batch, ChannelMode::Rayleigh, model.train.fading, beta, rng);
        const auto r = finite_diff_gradcheck(model.net, batch, o.epsilon, model.head_weights());
        const bool pass = r.max_relative_error < o.tolerance;
        ok = ok && pass;
        out << label << " max_relative_error " << fmt(r.max_relative_error) << " checked " << r.checked
            << " excluded " << r.excluded << (pass ? " ok" : " FAILED") << '\n';
    };
    if (o.system == "siso" || o.system == "all") {
        TrainConfig tc;
        tc.seed = g.seed;
        check("siso(7,4)", build_siso_autoencoder(SystemConfig{}, tc));
    }
    if (o.system == "mimo" || o.system == "all") {
        MimoTrainConfig tc;
        tc.seed = g.seed;
        check("mimo2x2(1,2)", build_mimo_autoencoder(SystemConfig{1, 2, 2, 2}, tc));
    }
    return ok ? kExitOk : kExitRuntime;
}

inline int cmd_codewords(const GlobalOptions& g, const CodewordsOptions& o, std::ostream& out)
{
    const auto model = load_model(o.model);
    const auto link = make_learned_link(std::make_shared<const TrainedModel>(model), ChannelMode::AwgnOnly);
    std::ostringstream csv;
    csv << "message,antenna,use,re,im\n";
    const std::size_t uses = model.net.arch.channel_uses;
    for (std::size_t m = 0; m < link.codebook.size(); ++m) {
        const auto& x = link.codebook[m];
        for (std::size_t a = 0; a < model.net.arch.tx_antennas; ++a)
            for (std::size_t t = 0; t < uses; ++t) {
                const std::size_t i = 2 * (a * uses + t);
                csv << m << ',' << a << ',' << t << ',' << fmt(x[i]) << ',' << fmt(x[i + 1]) << '\n';
            }
    }
    if (g.output.empty()) {
        out << csv.str();
    }
    else {
        auto file = aecomm::detail::open_for_write(g.output);
        file << csv.str();
    }
    return kExitOk;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"aecomm: learned and conventional link simulation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Config file ([section] key = value); command-line flags override it");

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--workers", g.workers, "Monte Carlo worker threads")->check(CLI::PositiveNumber);
    app.add_option("-o,--output", g.output, "Output file (default: $AECOMM_OUTPUT_DIR or ./results)");

    const auto channel_names = CLI::IsMember({"awgn", "awgn-only", "rayleigh"});
    const auto fading_names = CLI::IsMember({"block", "per-use"});

    TrainOptions t;
    auto* train = app.add_subcommand("train", "Build and train an autoencoder, save a checkpoint");
    train->add_option("--system", t.system)->check(CLI::IsMember({"siso", "mimo"}));
    train->add_option("--n", t.n, "Channel uses per message")->check(CLI::PositiveNumber);
    train->add_option("--k", t.k, "Bits per message (per stream)")->check(CLI::Range(1, 16));
    train->add_option("--batch", t.batch)->check(CLI::PositiveNumber);
    train->add_option("--lr", t.lr)->check(CLI::PositiveNumber);
    train->add_option("--iterations", t.iterations)->check(CLI::PositiveNumber);
    train->add_option("--train-ebn0", t.train_ebn0, "Training Eb/N0 in dB (default 6 SISO, 10 MIMO)");
    train->add_option("--gamma", t.gamma, "Head-1 loss weight (MIMO)")->check(CLI::Range(0.0, 1.0));
    train->add_option("--csi", t.csi)->check(CLI::IsMember({"genie", "none"}));
    train->add_option("--fading", t.fading)->check(fading_names);
    train->add_option("--channel", t.channel)->check(channel_names);
    train->add_option("--encoder-hidden", t.encoder_hidden)->delimiter(',');
    train->add_option("--decoder-hidden", t.decoder_hidden)->delimiter(',');
    train->add_option("--log-every", t.log_every, "Loss log interval, 0 to disable");

    SweepOptions s;
    auto* sweep = app.add_subcommand("sweep", "BER sweep of one link");
    sweep->add_option("--link", s.link)
        ->check(CLI::IsMember({"ae-siso", "ae-mimo", "conv-siso-uncoded", "conv-siso-hamming", "conv-mimo-ml",
                               "conv-mimo-zf", "random-guess"}));
    sweep->add_option("--model", s.model, "Checkpoint for ae-* links")->check(CLI::ExistingFile);
    sweep->add_option("--channel", s.channel)->check(channel_names);
    sweep->add_option("--fading", s.fading)->check(fading_names);
    sweep->add_option("--hamming", s.hamming, "Hamming decoder")->check(CLI::IsMember({"hard", "soft"}));
    sweep->add_option("--ebn0", s.ebn0, "Explicit Eb/N0 points in dB")->delimiter(',');
    sweep->add_option("--start", s.start);
    sweep->add_option("--stop", s.stop);
    sweep->add_option("--step", s.step)->check(CLI::PositiveNumber);
    sweep->add_option("--min-errors", s.min_errors)->check(CLI::PositiveNumber);
    sweep->add_option("--max-bits", s.max_bits)->check(CLI::PositiveNumber);
    sweep->add_flag("--plot-script", s.plot_script, "Also write a matplotlib script");

    BaselineOptions b;
    auto* baseline = app.add_subcommand("baseline", "Closed-form baseline curves to CSV");
    baseline->add_option("--modulation", b.modulation)->check(CLI::IsMember({"bpsk"}));
    baseline->add_option("--code", b.code)->check(CLI::IsMember({"none", "hamming74"}));
    baseline->add_option("--channel", b.channel)->check(channel_names);
    baseline->add_option("--start", b.start);
    baseline->add_option("--stop", b.stop);
    baseline->add_option("--step", b.step)->check(CLI::PositiveNumber);

    GradcheckOptions gc;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    gradcheck->add_option("--system", gc.system)->check(CLI::IsMember({"siso", "mimo", "all"}));
    gradcheck->add_option("--epsilon", gc.epsilon)->check(CLI::Range(1e-7, 1e-3));
    gradcheck->add_option("--batch", gc.batch)->check(CLI::PositiveNumber);
    gradcheck->add_option("--tolerance", gc.tolerance)->check(CLI::PositiveNumber);

    CodewordsOptions cw;
    auto* codewords = app.add_subcommand("codewords", "Dump a trained encoder's constellation as CSV");
    codewords->add_option("--model", cw.model)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return kExitUsage;
    }

    try {
        if (train->parsed()) return detail::cmd_train(g, t, out, err);
        if (sweep->parsed()) return detail::cmd_sweep(g, s, out, err);
        if (baseline->parsed()) return detail::cmd_baseline(g, b, out);
        if (gradcheck->parsed()) return detail::cmd_gradcheck(g, gc, out);
        if (codewords->parsed()) return detail::cmd_codewords(g, cw, out);
    }
    catch (const ContractViolation& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace aecomm::cli
