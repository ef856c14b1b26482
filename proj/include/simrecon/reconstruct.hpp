#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "simrecon/diffcore/adam.hpp"
#include "simrecon/forward.hpp"
#include "simrecon/network.hpp"

// Per-acquisition optimization: minimize the physics-informed loss between
// forward-projected network output and the measured sub-frames.

namespace simrecon {

enum class LossKind { Ssim, Mse };
enum class Regularizer { None, TotalVariation };

struct ReconConfig {
    double lr = 1e-3; // the one headline knob; sensible range [1e-4, 1e-3]
    double decay_rate = 0.9;
    int decay_every = 50;
    int epochs = 1000;
    Seed seed{1234};
    LossKind loss = LossKind::Ssim;
    double alpha = 0.0;
    Regularizer regularizer = Regularizer::None;
    int log_every = 50;
    int checkpoint_every = 0; // 0 disables periodic image dumps
    bool deterministic = true;
    bool early_stop = false;        // optional plateau cut
    double early_stop_delta = 1e-5; // on the 50-epoch moving average
};

void validate_recon_config(const ReconConfig& cfg);

double lr_schedule(int epoch, const ReconConfig& cfg);

struct LossReport {
    std::vector<double> loss;    // one entry per epoch run
    std::vector<double> lr;
    std::vector<double> seconds; // cumulative wall time at each epoch
    double final_loss = 0.0;
};

struct TrainingCheckpoint {
    UNetConfig net;
    int epoch = 0;
    ParameterSet params;
    diff::AdamState<float> adam;
};

void save_training_checkpoint(const TrainingCheckpoint& ckpt, const std::string& path);
TrainingCheckpoint load_training_checkpoint(const std::string& path);

struct ReconResult {
    Raster estimate;       // network output at the final epoch
    Raster best_estimate;  // output at the best-loss epoch
    double best_loss = 0.0;
    int best_epoch = 0;
    LossReport report;
    TrainingCheckpoint checkpoint; // final state, resumable
};

// Thrown when the loss turns non-finite; the last checkpoint is dumped to
// out_dir first when one is configured.
struct NonFiniteLossError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Graph assembly for the loss: forward-projects `estimate_node` through
// pattern multiplication, PSF convolution and binning, compares against the
// measured frames (bound as constants), and returns the scalar loss node.
struct PhysicsLossPorts {
    int loss = -1;
    std::vector<int> measured;      // constant leaf per frame (sub-frame grid)
    std::vector<int> pattern_nodes; // constant leaf per pattern (full grid)
    std::vector<std::pair<int, float>> scalar_bindings; // helper constants
    int neg_frame = -1;             // -1 constant for the mse residual, if any
};
PhysicsLossPorts append_physics_loss(diff::Graph<float>& graph, int estimate_node,
                                     const AcquisitionSpec& spec, const ReconConfig& cfg);

// Scalar convenience used by tests and evaluation: loss of a fixed estimate
// against normalized measured frames.
double physics_loss_value(const Raster& estimate, const ImageStack& measured,
                          const AcquisitionSpec& spec, const ReconConfig& cfg);

// The full loop. Measured frames are normalized to max 1 internally and
// bilinearly upsampled to the reconstruction grid as network input. When
// `out_dir` is non-empty, writes loss_trace.csv, periodic epoch_<k> dumps,
// checkpoint_best and checkpoint_last. `resume` continues a previous run.
ReconResult reconstruct(const ImageStack& measured, const PatternSet& patterns,
                        const OpticalModel& optics, int downsample,
                        const ReconConfig& cfg, const std::string& out_dir = "",
                        const TrainingCheckpoint* resume = nullptr);

} // namespace simrecon
