#include "simrecon/reconstruct.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace simrecon {

using diff::Graph;
using diff::Session;
using diff::Shape4;
using diff::Tensor4;

void validate_recon_config(const ReconConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("recon: lr must be > 0");
    if (cfg.epochs < 1) throw std::invalid_argument("recon: epochs must be >= 1");
    if (cfg.alpha < 0.0) throw std::invalid_argument("recon: alpha must be >= 0");
    if (!(cfg.decay_rate > 0.0 && cfg.decay_rate <= 1.0))
        throw std::invalid_argument("recon: decay_rate must be in (0, 1]");
    if (cfg.decay_every < 1) throw std::invalid_argument("recon: decay_every must be >= 1");
}

double lr_schedule(int epoch, const ReconConfig& cfg) {
    if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
    return cfg.lr * std::pow(cfg.decay_rate, double(epoch / cfg.decay_every));
}

PhysicsLossPorts append_physics_loss(Graph<float>& g, int estimate_node,
                                     const AcquisitionSpec& spec, const ReconConfig& cfg) {
    validate_acquisition(spec);
    const GridSpec grid = spec.optics.grid;
    const int n = spec.patterns.count();
    const int ds = spec.downsample;
    const Shape4 hi{1, 1, grid.height, grid.width};
    const Shape4 lo{1, 1, grid.height / ds, grid.width / ds};

    if (!(g.node(estimate_node).shape == hi))
        throw std::invalid_argument("physics_loss: estimate shape " +
                                    g.node(estimate_node).shape.str() +
                                    " does not match acquisition grid");

    const PsfKernel psf = airy_psf(spec.optics, spec.psf_support_radius);
    auto freq_kernel =
        std::make_shared<const fft::FreqKernel>(psf.raster, grid.height, grid.width);

    PhysicsLossPorts ports;

    // scalar helpers built from constants so the whole loss stays inside the
    // primitive set
    auto scalar_const = [&](double v, const std::string& name) {
        return g.constant(Shape4{1, 1, 1, 1}, name + "=" + std::to_string(v));
    };
    std::vector<std::pair<int, float>> scalar_bindings;
    auto bound_scalar = [&](double v, const std::string& name) {
        const int id = scalar_const(v, name);
        scalar_bindings.emplace_back(id, float(v));
        return id;
    };

    const int c_inv_n = bound_scalar(1.0 / n, "inv_frames");
    const int c_neg1 = bound_scalar(-1.0, "neg_one");
    const int c_one = bound_scalar(1.0, "one");

    std::shared_ptr<const diff::kernels::SsimConsts> ssim_consts;
    int neg_frame = -1; // -1 constant at sub-frame shape, for the mse residual
    if (cfg.loss == LossKind::Ssim)
        ssim_consts = std::make_shared<const diff::kernels::SsimConsts>(
            diff::kernels::make_ssim_consts(11, 1.5, 1.0));
    else
        neg_frame = g.constant(lo, "neg_one_frame");

    int score_sum = -1;
    for (int i = 0; i < n; ++i) {
        const int pat = g.constant(hi, "pattern[" + std::to_string(i) + "]");
        const int meas = g.constant(lo, "measured[" + std::to_string(i) + "]");
        ports.pattern_nodes.push_back(pat);
        ports.measured.push_back(meas);

        int h = g.mul(estimate_node, pat);
        h = g.psf_conv(h, freq_kernel);
        h = g.block_mean(h, ds);

        int score;
        if (cfg.loss == LossKind::Ssim) {
            score = g.ssim(h, meas, ssim_consts);
        } else {
            const int diff_node = g.add(h, g.mul(meas, neg_frame));
            score = g.mean(g.mul(diff_node, diff_node));
        }
        score_sum = i == 0 ? score : g.add(score_sum, score);
    }
    const int score_mean = g.mul(score_sum, c_inv_n);

    int loss;
    if (cfg.loss == LossKind::Ssim)
        loss = g.add(c_one, g.mul(score_mean, c_neg1)); // 1 - mean SSIM
    else
        loss = score_mean;

    if (cfg.regularizer == Regularizer::TotalVariation && cfg.alpha > 0.0) {
        const int c_alpha = bound_scalar(cfg.alpha, "alpha");
        loss = g.add(loss, g.mul(g.total_variation(estimate_node), c_alpha));
    }
    ports.loss = loss;
    ports.scalar_bindings = std::move(scalar_bindings);
    ports.neg_frame = neg_frame;
    return ports;
}

namespace {

void bind_loss_constants(Session<float>& session, const PhysicsLossPorts& ports,
                         const AcquisitionSpec& spec, const ImageStack& measured_norm) {
    for (size_t i = 0; i < ports.pattern_nodes.size(); ++i) {
        auto& t = session.leaf(ports.pattern_nodes[i]);
        const auto& f = spec.patterns.stack.frames[i];
        std::copy(f.begin(), f.end(), t.v.begin());
    }
    for (size_t i = 0; i < ports.measured.size(); ++i) {
        auto& t = session.leaf(ports.measured[i]);
        const auto& f = measured_norm.frames[i];
        std::copy(f.begin(), f.end(), t.v.begin());
    }
    for (auto [id, v] : ports.scalar_bindings) session.leaf(id).v[0] = v;
    if (ports.neg_frame >= 0) session.leaf(ports.neg_frame).fill(-1.0f);
}

} // namespace

double physics_loss_value(const Raster& estimate, const ImageStack& measured,
                          const AcquisitionSpec& spec, const ReconConfig& cfg) {
    if (int(measured.frames.size()) != spec.patterns.count())
        throw std::invalid_argument("physics_loss: frame count " +
                                    std::to_string(measured.frames.size()) +
                                    " != pattern count " +
                                    std::to_string(spec.patterns.count()));

    Graph<float> g;
    const Shape4 hi{1, 1, spec.optics.grid.height, spec.optics.grid.width};
    const int est = g.constant(hi, "estimate");
    PhysicsLossPorts ports = append_physics_loss(g, est, spec, cfg);

    Session<float> session(g);
    std::copy(estimate.v.begin(), estimate.v.end(), session.leaf(est).v.begin());
    bind_loss_constants(session, ports, spec, measured);
    session.forward();
    return double(session.value(ports.loss).v[0]);
}

void save_training_checkpoint(const TrainingCheckpoint& ckpt, const std::string& path) {
    save_parameters(ckpt.params, ckpt.net, path);
    // append optimizer state to the manifest + a sibling payload
    nlohmann::json extra = {
        {"epoch", ckpt.epoch},
        {"adam_t", ckpt.adam.t},
        {"adam_beta1", ckpt.adam.beta1},
        {"adam_beta2", ckpt.adam.beta2},
        {"adam_eps", ckpt.adam.eps},
    };
    std::ofstream js(path + ".opt.json", std::ios::trunc);
    js << extra.dump(2) << "\n";
    std::ofstream payload(path + ".opt.f64", std::ios::binary | std::ios::trunc);
    for (const auto& m : ckpt.adam.m)
        payload.write(reinterpret_cast<const char*>(m.data()), std::streamsize(m.size() * 8));
    for (const auto& v : ckpt.adam.v)
        payload.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 8));
}

TrainingCheckpoint load_training_checkpoint(const std::string& path) {
    TrainingCheckpoint ckpt;
    ckpt.params = load_parameters(path, &ckpt.net);

    std::ifstream js(path + ".opt.json");
    if (!js) throw std::runtime_error("load_training_checkpoint: missing " + path + ".opt.json");
    nlohmann::json extra = nlohmann::json::parse(js);
    ckpt.epoch = extra.at("epoch").get<int>();
    ckpt.adam.t = extra.at("adam_t").get<int64_t>();
    ckpt.adam.beta1 = extra.at("adam_beta1").get<double>();
    ckpt.adam.beta2 = extra.at("adam_beta2").get<double>();
    ckpt.adam.eps = extra.at("adam_eps").get<double>();

    std::ifstream payload(path + ".opt.f64", std::ios::binary);
    if (!payload)
        throw std::runtime_error("load_training_checkpoint: missing " + path + ".opt.f64");
    ckpt.adam.m.resize(ckpt.params.values.size());
    ckpt.adam.v.resize(ckpt.params.values.size());
    for (size_t i = 0; i < ckpt.params.values.size(); ++i) {
        ckpt.adam.m[i].resize(size_t(ckpt.params.values[i].numel()));
        ckpt.adam.v[i].resize(size_t(ckpt.params.values[i].numel()));
    }
    for (auto& m : ckpt.adam.m)
        payload.read(reinterpret_cast<char*>(m.data()), std::streamsize(m.size() * 8));
    for (auto& v : ckpt.adam.v)
        payload.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * 8));
    if (!payload) throw std::runtime_error("load_training_checkpoint: short optimizer payload");
    return ckpt;
}

ReconResult reconstruct(const ImageStack& measured, const PatternSet& patterns,
                        const OpticalModel& optics, int downsample, const ReconConfig& cfg,
                        const std::string& out_dir, const TrainingCheckpoint* resume) {
    validate_recon_config(cfg);
    if (int(measured.frames.size()) != patterns.count())
        throw std::invalid_argument("reconstruct: measured frame count " +
                                    std::to_string(measured.frames.size()) +
                                    " != pattern count " + std::to_string(patterns.count()));
    AcquisitionSpec spec;
    spec.optics = optics;
    spec.patterns = patterns;
    spec.downsample = downsample;
    spec.seed = cfg.seed;
    validate_acquisition(spec);
    if (measured.grid.width != optics.grid.width / downsample ||
        measured.grid.height != optics.grid.height / downsample)
        throw std::invalid_argument("reconstruct: measured grid does not match "
                                    "acquisition grid / downsample");

    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);

    const int n = patterns.count();
    UNetConfig net_cfg;
    net_cfg.in_channels = n;
    net_cfg.height = optics.grid.height;
    net_cfg.width = optics.grid.width;
    if (resume) {
        net_cfg = resume->net;
        if (net_cfg.in_channels != n)
            throw std::invalid_argument("reconstruct: checkpoint channel count mismatch");
    }

    // Normalized measurement, upsampled to the reconstruction grid as input.
    const ImageStack g_norm = normalize_unit(measured);
    ImageStack net_input;
    for (int i = 0; i < n; ++i)
        net_input.push(upsample_bilinear(g_norm.frame(i), downsample));

    Graph<float> graph;
    UNetPorts net = append_unet(graph, net_cfg);
    PhysicsLossPorts loss_ports = append_physics_loss(graph, net.output, spec, cfg);

    Session<float> session(graph);
    {
        Tensor4<float>& in = session.leaf(net.input);
        const int64_t plane = int64_t(net_cfg.height) * net_cfg.width;
        for (int c = 0; c < n; ++c)
            std::copy(net_input.frames[size_t(c)].begin(), net_input.frames[size_t(c)].end(),
                      in.v.begin() + c * plane);
    }
    bind_loss_constants(session, loss_ports, spec, g_norm);

    ParameterSet params = resume ? resume->params : init_params(net_cfg, cfg.seed);
    if (params.values.size() != net.params.size())
        throw std::invalid_argument("reconstruct: parameter set does not match network");
    for (size_t i = 0; i < params.values.size(); ++i)
        session.leaf(net.params[i]) = params.values[i];

    std::vector<Tensor4<float>*> param_ptrs;
    std::vector<const Tensor4<float>*> grad_ptrs;
    for (int id : net.params) {
        param_ptrs.push_back(&session.leaf(id));
        grad_ptrs.push_back(&session.adjoint(id));
    }

    diff::AdamState<float> adam;
    if (resume) adam = resume->adam;

    const int start_epoch = resume ? resume->epoch : 0;
    const int end_epoch = cfg.epochs;
    if (start_epoch >= end_epoch)
        throw std::invalid_argument("reconstruct: resume epoch is past the epoch budget");

    ReconResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    ParameterSet best_params;

    auto snapshot_params = [&]() {
        ParameterSet ps;
        ps.names = params.names;
        for (int id : net.params) ps.values.push_back(session.value(id));
        return ps;
    };
    auto raster_of_output = [&]() {
        const auto& out = session.value(net.output);
        Raster r(optics.grid);
        r.v.assign(out.v.begin(), out.v.end());
        return r;
    };
    auto make_checkpoint = [&](int epoch) {
        TrainingCheckpoint ckpt;
        ckpt.net = net_cfg;
        ckpt.epoch = epoch;
        ckpt.params = snapshot_params();
        ckpt.adam = adam;
        return ckpt;
    };

    std::ofstream trace;
    if (!out_dir.empty()) {
        trace.open(out_dir + "/loss_trace.csv", std::ios::trunc);
        trace << "epoch,loss,lr,seconds\n";
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
        session.forward();
        const double loss = double(session.value(loss_ports.loss).v[0]);
        if (!std::isfinite(loss)) {
            if (!out_dir.empty())
                save_training_checkpoint(make_checkpoint(epoch), out_dir + "/checkpoint_last");
            throw NonFiniteLossError("reconstruct: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }

        const double lr = lr_schedule(epoch, cfg);
        result.report.loss.push_back(loss);
        result.report.lr.push_back(lr);
        result.report.seconds.push_back(elapsed());
        if (trace.is_open())
            trace << epoch << "," << loss << "," << lr << "," << result.report.seconds.back()
                  << "\n";

        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_epoch = epoch;
            best_params = snapshot_params();
        }

        if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
            epoch % cfg.checkpoint_every == 0) {
            ImageStack dump;
            dump.push(raster_of_output());
            dump.labels = {"content=epoch_estimate", "epoch=" + std::to_string(epoch)};
            save_raster(dump, out_dir + "/epoch_" + std::to_string(epoch));
        }

        session.backward(loss_ports.loss);
        diff::adam_step(param_ptrs, grad_ptrs, adam, lr, params.names);

        // optional plateau cut on the trailing moving average
        if (cfg.early_stop) {
            const int w = 50;
            const int have = int(result.report.loss.size());
            if (have >= 2 * w) {
                double recent = 0.0, prev = 0.0;
                for (int i = have - w; i < have; ++i) recent += result.report.loss[size_t(i)];
                for (int i = have - 2 * w; i < have - w; ++i)
                    prev += result.report.loss[size_t(i)];
                if ((prev - recent) / w < cfg.early_stop_delta) break;
            }
        }
    }

    // Final forward at the updated parameters.
    session.forward();
    const double final_loss = double(session.value(loss_ports.loss).v[0]);
    result.report.final_loss = final_loss;
    result.estimate = raster_of_output();
    result.checkpoint = make_checkpoint(end_epoch);

    if (final_loss < result.best_loss) {
        result.best_loss = final_loss;
        result.best_epoch = end_epoch;
        best_params = snapshot_params();
        result.best_estimate = result.estimate;
    } else {
        for (size_t i = 0; i < best_params.values.size(); ++i)
            session.leaf(net.params[i]) = best_params.values[i];
        session.forward();
        result.best_estimate = raster_of_output();
        // restore final parameters so the checkpoint stays consistent
        for (size_t i = 0; i < result.checkpoint.params.values.size(); ++i)
            session.leaf(net.params[i]) = result.checkpoint.params.values[i];
    }

    if (!out_dir.empty()) {
        save_training_checkpoint(result.checkpoint, out_dir + "/checkpoint_last");
        TrainingCheckpoint best;
        best.net = net_cfg;
        best.epoch = result.best_epoch;
        best.params = best_params;
        best.adam = adam;
        save_training_checkpoint(best, out_dir + "/checkpoint_best");
    }
    return result;
}

} // namespace simrecon
