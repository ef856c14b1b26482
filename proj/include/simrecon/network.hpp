#pragma once

#include <string>
#include <vector>

#include "simrecon/diffcore/graph.hpp"
#include "simrecon/imgcore.hpp"

// U-Net mapping the upsampled sub-frame stack (n channels) to a single
// nonnegative object estimate of the same spatial size.

namespace simrecon {

struct UNetConfig {
    int in_channels = 9;
    int depth = 3;            // down/up levels
    int base_width = 32;      // doubles per level; bottleneck = base << depth
    int convs_per_level = 2;
    int height = 128;
    int width = 128;
};

void validate_unet_config(const UNetConfig& cfg);

// Ordered trainable tensors (kernel, bias, kernel, bias, ...).
struct ParameterSet {
    std::vector<diff::Tensor4<float>> values;
    std::vector<std::string> names;
};

struct UNetPorts {
    int input = -1;   // constant leaf (1, n, H, W)
    int output = -1;  // (1, 1, H, W), nonnegative
    std::vector<int> params;          // trainable leaf ids, checkpoint order
    std::vector<std::string> names;   // parallel to params
};

// Appends the network onto an existing graph so callers can keep building
// (e.g. attach the physics loss to the output node).
UNetPorts append_unet(diff::Graph<float>& graph, const UNetConfig& cfg);

struct UNetGraph {
    diff::Graph<float> graph;
    UNetPorts ports;
    UNetConfig config;
};

UNetGraph build_unet(const UNetConfig& cfg);

// He-initialized kernels (std = sqrt(2/fan_in)), zero biases; deterministic
// per seed.
ParameterSet init_params(const UNetConfig& cfg, Seed seed);

// Closed-form trainable scalar count for the configuration.
int64_t parameter_count(const UNetConfig& cfg);

// Convenience: bind input+params, run forward, return the estimate raster.
// `input` holds n frames on the reconstruction grid, values in [0, 1].
Raster unet_forward(const UNetGraph& net, const ParameterSet& params,
                    const ImageStack& input);

// Checkpoint: <base>.json manifest + <base>.f32 concatenated payload.
void save_parameters(const ParameterSet& params, const UNetConfig& cfg,
                     const std::string& path);
ParameterSet load_parameters(const std::string& path, UNetConfig* cfg_out = nullptr);

} // namespace simrecon
