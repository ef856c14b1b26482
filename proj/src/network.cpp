#include "simrecon/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace simrecon {

using diff::Graph;
using diff::Shape4;
using diff::Tensor4;

void validate_unet_config(const UNetConfig& cfg) {
    if (cfg.in_channels < 1) throw std::invalid_argument("unet: in_channels must be >= 1");
    if (cfg.depth < 1) throw std::invalid_argument("unet: depth must be >= 1");
    if (cfg.base_width < 1) throw std::invalid_argument("unet: base_width must be >= 1");
    if (cfg.convs_per_level < 1)
        throw std::invalid_argument("unet: convs_per_level must be >= 1");
    const int div = 1 << cfg.depth;
    if (cfg.height % div || cfg.width % div)
        throw std::invalid_argument("unet: spatial dims " + std::to_string(cfg.width) + "x" +
                                    std::to_string(cfg.height) + " not divisible by 2^depth (" +
                                    std::to_string(div) + ")");
}

// conv widths in graph order: (cin, cout) per conv layer
static std::vector<std::pair<int, int>> conv_plan(const UNetConfig& cfg) {
    std::vector<std::pair<int, int>> plan;
    int ch = cfg.in_channels;
    std::vector<int> skip_ch;
    for (int level = 0; level < cfg.depth; ++level) {
        const int width = cfg.base_width << level;
        for (int i = 0; i < cfg.convs_per_level; ++i) {
            plan.emplace_back(ch, width);
            ch = width;
        }
        skip_ch.push_back(ch);
    }
    const int bottleneck = cfg.base_width << cfg.depth;
    for (int i = 0; i < cfg.convs_per_level; ++i) {
        plan.emplace_back(ch, bottleneck);
        ch = bottleneck;
    }
    for (int level = cfg.depth - 1; level >= 0; --level) {
        const int width = cfg.base_width << level;
        plan.emplace_back(ch + skip_ch[size_t(level)], width); // after concat
        ch = width;
        for (int i = 1; i < cfg.convs_per_level; ++i) plan.emplace_back(ch, width);
    }
    plan.emplace_back(ch, 1); // final projection to the object estimate
    return plan;
}

int64_t parameter_count(const UNetConfig& cfg) {
    validate_unet_config(cfg);
    int64_t count = 0;
    for (auto [cin, cout] : conv_plan(cfg)) count += int64_t(cout) * cin * 9 + cout;
    return count;
}

UNetPorts append_unet(Graph<float>& g, const UNetConfig& cfg) {
    validate_unet_config(cfg);

    UNetPorts ports;
    ports.input = g.constant(Shape4{1, cfg.in_channels, cfg.height, cfg.width}, "unet_input");

    int conv_idx = 0;
    auto conv_relu = [&](int x, int cout) {
        const int cin = g.node(x).shape.c;
        const std::string kname = "conv" + std::to_string(conv_idx) + ".kernel";
        const std::string bname = "conv" + std::to_string(conv_idx) + ".bias";
        ++conv_idx;
        const int k = g.parameter(Shape4{cout, cin, 3, 3}, kname);
        const int b = g.parameter(Shape4{1, cout, 1, 1}, bname);
        ports.params.push_back(k);
        ports.params.push_back(b);
        ports.names.push_back(kname);
        ports.names.push_back(bname);
        return g.relu(g.conv2d(x, k, b));
    };

    int x = ports.input;
    std::vector<int> skips;
    for (int level = 0; level < cfg.depth; ++level) {
        const int width = cfg.base_width << level;
        for (int i = 0; i < cfg.convs_per_level; ++i) x = conv_relu(x, width);
        skips.push_back(x);
        x = g.maxpool2(x);
    }
    const int bottleneck = cfg.base_width << cfg.depth;
    for (int i = 0; i < cfg.convs_per_level; ++i) x = conv_relu(x, bottleneck);
    for (int level = cfg.depth - 1; level >= 0; --level) {
        x = g.upsample2(x);
        x = g.concat_channels({x, skips[size_t(level)]});
        const int width = cfg.base_width << level;
        for (int i = 0; i < cfg.convs_per_level; ++i) x = conv_relu(x, width);
    }
    ports.output = conv_relu(x, 1); // final relu keeps the estimate nonnegative
    return ports;
}

UNetGraph build_unet(const UNetConfig& cfg) {
    UNetGraph net;
    net.config = cfg;
    net.ports = append_unet(net.graph, cfg);
    return net;
}

ParameterSet init_params(const UNetConfig& cfg, Seed seed) {
    validate_unet_config(cfg);
    Rng rng = Rng(seed).fork("winit");

    ParameterSet ps;
    int conv_idx = 0;
    for (auto [cin, cout] : conv_plan(cfg)) {
        Tensor4<float> kernel(Shape4{cout, cin, 3, 3});
        const double std = std::sqrt(2.0 / (double(cin) * 9.0));
        for (auto& v : kernel.v) v = float(std * rng.gaussian());
        Tensor4<float> bias(Shape4{1, cout, 1, 1}); // zeros
        ps.names.push_back("conv" + std::to_string(conv_idx) + ".kernel");
        ps.values.push_back(std::move(kernel));
        ps.names.push_back("conv" + std::to_string(conv_idx) + ".bias");
        ps.values.push_back(std::move(bias));
        ++conv_idx;
    }
    return ps;
}

Raster unet_forward(const UNetGraph& net, const ParameterSet& params,
                    const ImageStack& input) {
    const auto& cfg = net.config;
    if (int(input.frames.size()) != cfg.in_channels)
        throw std::invalid_argument("unet_forward: expected " +
                                    std::to_string(cfg.in_channels) + " input frames, got " +
                                    std::to_string(input.frames.size()));
    if (input.grid.height != cfg.height || input.grid.width != cfg.width)
        throw std::invalid_argument("unet_forward: input grid does not match network size");
    if (params.values.size() != net.ports.params.size())
        throw std::invalid_argument("unet_forward: parameter count mismatch");

    diff::Session<float> session(net.graph);
    Tensor4<float>& in = session.leaf(net.ports.input);
    for (int c = 0; c < cfg.in_channels; ++c)
        std::copy(input.frames[size_t(c)].begin(), input.frames[size_t(c)].end(),
                  in.v.begin() + int64_t(c) * cfg.height * cfg.width);
    for (size_t i = 0; i < params.values.size(); ++i)
        session.leaf(net.ports.params[i]) = params.values[i];

    session.forward();
    const Tensor4<float>& out = session.value(net.ports.output);

    Raster estimate(input.grid);
    estimate.v.assign(out.v.begin(), out.v.end());
    return estimate;
}

void save_parameters(const ParameterSet& params, const UNetConfig& cfg,
                     const std::string& path) {
    std::string base = path;
    for (const char* ext : {".json", ".f32"})
        if (base.size() > std::strlen(ext) &&
            base.compare(base.size() - std::strlen(ext), std::string::npos, ext) == 0)
            base = base.substr(0, base.size() - std::strlen(ext));

    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& t : params.values)
        shapes.push_back({t.shape.n, t.shape.c, t.shape.h, t.shape.w});
    nlohmann::json manifest = {
        {"magic", "SIMP1"},
        {"config",
         {{"in_channels", cfg.in_channels},
          {"depth", cfg.depth},
          {"base_width", cfg.base_width},
          {"convs_per_level", cfg.convs_per_level},
          {"height", cfg.height},
          {"width", cfg.width}}},
        {"names", params.names},
        {"shapes", shapes},
    };
    std::ofstream js(base + ".json", std::ios::trunc);
    if (!js) throw std::runtime_error("save_parameters: cannot write " + base + ".json");
    js << manifest.dump(2) << "\n";

    std::ofstream payload(base + ".f32", std::ios::binary | std::ios::trunc);
    if (!payload) throw std::runtime_error("save_parameters: cannot write " + base + ".f32");
    for (const auto& t : params.values)
        payload.write(reinterpret_cast<const char*>(t.data()),
                      std::streamsize(t.numel() * 4));
}

ParameterSet load_parameters(const std::string& path, UNetConfig* cfg_out) {
    std::string base = path;
    for (const char* ext : {".json", ".f32"})
        if (base.size() > std::strlen(ext) &&
            base.compare(base.size() - std::strlen(ext), std::string::npos, ext) == 0)
            base = base.substr(0, base.size() - std::strlen(ext));

    std::ifstream js(base + ".json");
    if (!js) throw std::runtime_error("load_parameters: missing " + base + ".json");
    nlohmann::json manifest = nlohmann::json::parse(js);
    if (manifest.value("magic", "") != std::string("SIMP1"))
        throw std::runtime_error("load_parameters: bad magic in " + base + ".json");

    if (cfg_out) {
        const auto& c = manifest.at("config");
        cfg_out->in_channels = c.at("in_channels").get<int>();
        cfg_out->depth = c.at("depth").get<int>();
        cfg_out->base_width = c.at("base_width").get<int>();
        cfg_out->convs_per_level = c.at("convs_per_level").get<int>();
        cfg_out->height = c.at("height").get<int>();
        cfg_out->width = c.at("width").get<int>();
    }

    ParameterSet ps;
    ps.names = manifest.at("names").get<std::vector<std::string>>();
    std::ifstream payload(base + ".f32", std::ios::binary);
    if (!payload) throw std::runtime_error("load_parameters: missing " + base + ".f32");
    for (const auto& s : manifest.at("shapes")) {
        Shape4 shape{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>(),
                     s.at(3).get<int>()};
        Tensor4<float> t(shape);
        payload.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.numel() * 4));
        if (!payload)
            throw std::runtime_error("load_parameters: short payload in " + base + ".f32");
        ps.values.push_back(std::move(t));
    }
    for (const auto& t : ps.values)
        for (float v : t.v)
            if (!std::isfinite(v))
                throw std::runtime_error("load_parameters: non-finite parameter value");
    return ps;
}

} // namespace simrecon
