#include "amvcast/nn.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "amvcast/io.hpp"

namespace amvcast::nn {

using nlohmann::json;

void CnnConfig::validate() const {
    const int vals[] = {conv1_filters, conv1_kh, conv1_kw, pool1_h, pool1_w,
                        conv2_filters, conv2_kh, conv2_kw, pool2_h, pool2_w, hidden};
    for (int v : vals) {
        if (v < 1) throw ConfigError("network hyperparameters must all be positive");
    }
    if (n_classes != kNumClasses) {
        throw ConfigError("classifier head must have exactly 3 outputs");
    }
}

StageDims compute_stage_dims(const CnnConfig& cfg, int in_h, int in_w) {
    cfg.validate();
    if (in_h < 1 || in_w < 1) throw ShapeError("input dims must be positive");
    StageDims d;
    d.conv1_h = in_h - cfg.conv1_kh + 1;
    d.conv1_w = in_w - cfg.conv1_kw + 1;
    if (d.conv1_h < 1 || d.conv1_w < 1) throw ShapeError("input too small for first conv kernel");
    d.pool1_h = d.conv1_h / cfg.pool1_h;
    d.pool1_w = d.conv1_w / cfg.pool1_w;
    if (d.pool1_h < 1 || d.pool1_w < 1) throw ShapeError("input too small for first pool window");
    d.conv2_h = d.pool1_h - cfg.conv2_kh + 1;
    d.conv2_w = d.pool1_w - cfg.conv2_kw + 1;
    if (d.conv2_h < 1 || d.conv2_w < 1) throw ShapeError("input too small for second conv kernel");
    d.pool2_h = d.conv2_h / cfg.pool2_h;
    d.pool2_w = d.conv2_w / cfg.pool2_w;
    if (d.pool2_h < 1 || d.pool2_w < 1) throw ShapeError("input too small for second pool window");
    d.flatten = cfg.conv2_filters * d.pool2_h * d.pool2_w;
    return d;
}

namespace {

json config_to_json(const CnnConfig& c) {
    return json{{"conv1_filters", c.conv1_filters}, {"conv1_kh", c.conv1_kh},
                {"conv1_kw", c.conv1_kw},           {"pool1_h", c.pool1_h},
                {"pool1_w", c.pool1_w},             {"conv2_filters", c.conv2_filters},
                {"conv2_kh", c.conv2_kh},           {"conv2_kw", c.conv2_kw},
                {"pool2_h", c.pool2_h},             {"pool2_w", c.pool2_w},
                {"hidden", c.hidden},               {"n_classes", c.n_classes}};
}

CnnConfig config_from_json(const json& j) {
    CnnConfig c;
    c.conv1_filters = j.at("conv1_filters").get<int>();
    c.conv1_kh = j.at("conv1_kh").get<int>();
    c.conv1_kw = j.at("conv1_kw").get<int>();
    c.pool1_h = j.at("pool1_h").get<int>();
    c.pool1_w = j.at("pool1_w").get<int>();
    c.conv2_filters = j.at("conv2_filters").get<int>();
    c.conv2_kh = j.at("conv2_kh").get<int>();
    c.conv2_kw = j.at("conv2_kw").get<int>();
    c.pool2_h = j.at("pool2_h").get<int>();
    c.pool2_w = j.at("pool2_w").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    return c;
}

}  // namespace

void save_checkpoint(const CnnModel<float>& m, const std::filesystem::path& path, int epoch) {
    json header;
    header["schema_version"] = 1;
    header["config"] = config_to_json(m.config);
    header["input"] = {{"channels", m.in_channels}, {"height", m.in_height}, {"width", m.in_width}};
    header["init_seed"] = m.init_seed;
    header["epoch"] = epoch;
    header["dtype"] = "f32le";
    json order = json::array();
    for (const char* name : kParamGroupNames) order.push_back(name);
    header["param_order"] = order;

    std::vector<float> blob;
    for (const auto* group : param_groups(m)) {
        blob.insert(blob.end(), group->begin(), group->end());
    }
    std::string bytes = header.dump();
    bytes.push_back('\n');
    const std::vector<std::uint8_t> raw = floats_to_le(blob);
    bytes.append(reinterpret_cast<const char*>(raw.data()), raw.size());
    write_file_bytes(path, bytes.data(), bytes.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    auto nl = std::find(bytes.begin(), bytes.end(), static_cast<std::uint8_t>('\n'));
    if (nl == bytes.end()) throw FormatError("checkpoint missing header line: " + path.string());
    json header;
    try {
        header = json::parse(std::string(bytes.begin(), nl));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad checkpoint header: ") + e.what());
    }
    try {
        if (header.at("schema_version").get<int>() != 1) {
            throw FormatError("unsupported checkpoint schema version");
        }
        if (header.at("dtype").get<std::string>() != "f32le") {
            throw FormatError("unsupported checkpoint dtype");
        }
        CnnConfig cfg = config_from_json(header.at("config"));
        const auto& in = header.at("input");
        Checkpoint ck;
        ck.model = make_model<float>(cfg, in.at("channels").get<int>(), in.at("height").get<int>(),
                                     in.at("width").get<int>(), header.at("init_seed").get<std::uint64_t>());
        ck.epoch = header.at("epoch").get<int>();

        auto order = header.at("param_order").get<std::vector<std::string>>();
        if (order.size() != kParamGroupNames.size()) {
            throw FormatError("checkpoint parameter order mismatch");
        }
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i] != kParamGroupNames[i]) {
                throw FormatError("checkpoint parameter order mismatch");
            }
        }

        auto groups = param_groups(ck.model);
        std::size_t total = 0;
        for (const auto* g : groups) total += g->size();
        const std::size_t blob_off = static_cast<std::size_t>(nl - bytes.begin()) + 1;
        if (bytes.size() - blob_off != total * 4) {
            std::ostringstream os;
            os << "checkpoint blob holds " << (bytes.size() - blob_off) / 4 << " floats, expected "
               << total;
            throw FormatError(os.str());
        }
        std::vector<float> blob =
            floats_from_le(std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(blob_off), bytes.end()));
        std::size_t pos = 0;
        for (auto* g : groups) {
            std::copy(blob.begin() + pos, blob.begin() + pos + g->size(), g->begin());
            pos += g->size();
        }
        return ck;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad checkpoint header: ") + e.what());
    }
}

}  // namespace amvcast::nn
