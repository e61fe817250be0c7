#pragma once

// Versioned JSON checkpoints. Doubles are written in shortest round-trip
// form, so write -> read reproduces every parameter bit-for-bit.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "aecomm/autoenc.hpp"
#include "aecomm/nn.hpp"

namespace aecomm {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "aecomm-checkpoint";

inline nlohmann::json to_json(const Architecture& a)
{
    return {{"input_width", a.input_width},           {"encoder_hidden", a.encoder_hidden},
            {"channel_uses", a.channel_uses},         {"tx_antennas", a.tx_antennas},
            {"rx_antennas", a.rx_antennas},           {"receiver_csi", a.receiver_csi},
            {"csi_realizations", a.csi_realizations}, {"decoder_hidden", a.decoder_hidden},
            {"head_count", a.head_count},             {"head_width", a.head_width}};
}

inline Architecture architecture_from_json(const nlohmann::json& j)
{
    Architecture a;
    a.input_width = j.at("input_width").get<std::size_t>();
    a.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
    a.channel_uses = j.at("channel_uses").get<std::size_t>();
    a.tx_antennas = j.at("tx_antennas").get<std::size_t>();
    a.rx_antennas = j.at("rx_antennas").get<std::size_t>();
    a.receiver_csi = j.at("receiver_csi").get<bool>();
    a.csi_realizations = j.at("csi_realizations").get<std::size_t>();
    a.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
    a.head_count = j.at("head_count").get<std::size_t>();
    a.head_width = j.at("head_width").get<std::size_t>();
    a.validate();
    return a;
}

/// Architecture widths, layer order, and row-major weights and biases.
inline nlohmann::json to_json(const Network& net)
{
    nlohmann::json layers = nlohmann::json::array();
    const auto kinds = net.arch.layer_kinds();
    for (const auto& l : net.params.layers)
        layers.push_back({{"in", l.in_width}, {"out", l.out_width}, {"weights", l.weights}, {"bias", l.bias}});
    nlohmann::json order = nlohmann::json::array();
    for (auto k : kinds) order.push_back(to_string(k));
    return {{"architecture", to_json(net.arch)}, {"layer_order", order}, {"layers", layers}};
}

inline Network network_from_json(const nlohmann::json& j)
{
    Network net;
    net.arch = architecture_from_json(j.at("architecture"));
    for (const auto& l : j.at("layers"))
        net.params.layers.emplace_back(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                                       l.at("weights").get<std::vector<double>>(),
                                       l.at("bias").get<std::vector<double>>());
    net.validate();
    return net;
}

inline nlohmann::json to_json(const SystemConfig& c)
{
    return {{"n", c.n}, {"k", c.k}, {"tx_antennas", c.tx_antennas}, {"rx_antennas", c.rx_antennas}};
}

inline SystemConfig system_from_json(const nlohmann::json& j)
{
    SystemConfig c{j.at("n").get<std::size_t>(), j.at("k").get<std::size_t>(), j.at("tx_antennas").get<std::size_t>(),
                   j.at("rx_antennas").get<std::size_t>()};
    c.validate();
    return c;
}

inline nlohmann::json to_json(const TrainConfig& t)
{
    return {{"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"train_ebn0_db", t.train_ebn0_db},
            {"iterations", t.iterations},
            {"seed", t.seed},
            {"csi_rx", to_string(t.csi)},
            {"fading", to_string(t.fading)},
            {"channel", to_string(t.channel)},
            {"encoder_hidden", t.encoder_hidden},
            {"decoder_hidden", t.decoder_hidden}};
}

inline TrainConfig train_from_json(const nlohmann::json& j)
{
    TrainConfig t;
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.learning_rate = j.at("learning_rate").get<double>();
    t.train_ebn0_db = j.at("train_ebn0_db").get<double>();
    t.iterations = j.at("iterations").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.csi = parse_csi_mode(j.at("csi_rx").get<std::string>());
    t.fading = parse_fading_mode(j.at("fading").get<std::string>());
    t.channel = parse_channel_mode(j.at("channel").get<std::string>());
    t.encoder_hidden = j.value("encoder_hidden", std::vector<std::size_t>{});
    t.decoder_hidden = j.value("decoder_hidden", std::vector<std::size_t>{});
    return t;
}

inline nlohmann::json to_json(const TrainedModel& m)
{
    nlohmann::json j = {{"format", kCheckpointFormat},
                        {"version", kCheckpointVersion},
                        {"system", to_json(m.system)},
                        {"train", to_json(m.train)},
                        {"gamma", m.gamma},
                        {"trained", m.trained},
                        {"network", to_json(m.net)}};
    j["final_loss"] = std::isfinite(m.final_loss) ? nlohmann::json(m.final_loss) : nlohmann::json(nullptr);
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j)
{
    if (j.value("format", std::string{}) != kCheckpointFormat)
        throw std::runtime_error("not an aecomm checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    TrainedModel m;
    m.system = system_from_json(j.at("system"));
    m.train = train_from_json(j.at("train"));
    m.gamma = j.at("gamma").get<double>();
    m.trained = j.at("trained").get<bool>();
    m.net = network_from_json(j.at("network"));
    m.final_loss = j.at("final_loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                 : j.at("final_loss").get<double>();
    return m;
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << to_json(model).dump() << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline TrainedModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    try {
        return model_from_json(nlohmann::json::parse(in));
    }
    catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed checkpoint '" + path.string() + "': " + e.what());
    }
}

}  // namespace aecomm
