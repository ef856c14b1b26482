#include "simrecon/runconfig.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "simrecon/metrics.hpp"

namespace simrecon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& scope) {
    if (!j.is_object())
        throw std::invalid_argument("config: '" + scope + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::invalid_argument("config: unknown key '" + scope + "." + it.key() +
                                        "'");
    }
}

LossKind loss_from_name(const std::string& s) {
    if (s == "ssim") return LossKind::Ssim;
    if (s == "mse") return LossKind::Mse;
    throw std::invalid_argument("config: loss must be 'ssim' or 'mse', got '" + s + "'");
}

Regularizer reg_from_name(const std::string& s) {
    if (s == "none") return Regularizer::None;
    if (s == "total_variation") return Regularizer::TotalVariation;
    throw std::invalid_argument(
        "config: regularizer must be 'none' or 'total_variation', got '" + s + "'");
}

std::string loss_name(LossKind k) { return k == LossKind::Ssim ? "ssim" : "mse"; }
std::string reg_name(Regularizer r) {
    return r == Regularizer::None ? "none" : "total_variation";
}

} // namespace

RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    reject_unknown(j, {"grid", "optics", "patterns", "acquisition", "phantom", "recon",
                       "seed", "deterministic"},
                   "");

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        reject_unknown(g, {"width", "height", "pitch_nm"}, "grid");
        cfg.grid.width = g.value("width", cfg.grid.width);
        cfg.grid.height = g.value("height", cfg.grid.height);
        cfg.grid.pitch_nm = g.value("pitch_nm", cfg.grid.pitch_nm);
    }
    if (j.contains("optics")) {
        const auto& o = j.at("optics");
        reject_unknown(o, {"na", "wavelength_nm"}, "optics");
        cfg.na = o.value("na", cfg.na);
        cfg.wavelength_nm = o.value("wavelength_nm", cfg.wavelength_nm);
    }
    if (j.contains("patterns")) {
        const auto& p = j.at("patterns");
        reject_unknown(p,
                       {"modality", "k0_factor", "modulation", "harmonics",
                        "lattice_pitch_nm", "hotspot_fwhm_nm", "file"},
                       "patterns");
        cfg.modality = p.value("modality", cfg.modality);
        if (p.contains("k0_factor")) cfg.k0_factor = p.at("k0_factor").get<double>();
        cfg.modulation = p.value("modulation", cfg.modulation);
        if (p.contains("harmonics"))
            cfg.harmonics = p.at("harmonics").get<std::vector<double>>();
        cfg.lattice_pitch_nm = p.value("lattice_pitch_nm", cfg.lattice_pitch_nm);
        cfg.hotspot_fwhm_nm = p.value("hotspot_fwhm_nm", cfg.hotspot_fwhm_nm);
        cfg.pattern_file = p.value("file", cfg.pattern_file);
    }
    if (j.contains("acquisition")) {
        const auto& a = j.at("acquisition");
        reject_unknown(a, {"downsample", "snr"}, "acquisition");
        cfg.downsample = a.value("downsample", cfg.downsample);
        if (a.contains("snr")) {
            if (a.at("snr").is_null())
                cfg.snr.reset();
            else
                cfg.snr = a.at("snr").get<double>();
        }
    }
    if (j.contains("phantom")) {
        const auto& p = j.at("phantom");
        reject_unknown(p,
                       {"kind", "separation_abbe", "line_width_px", "orientation", "count",
                        "curvature", "radius_px", "spokes", "smooth_sigma_px", "file"},
                       "phantom");
        cfg.phantom_kind = p.value("kind", cfg.phantom_kind);
        cfg.separation_abbe = p.value("separation_abbe", cfg.separation_abbe);
        cfg.line_width_px = p.value("line_width_px", cfg.line_width_px);
        cfg.orientation = p.value("orientation", cfg.orientation);
        cfg.count = p.value("count", cfg.count);
        cfg.curvature = p.value("curvature", cfg.curvature);
        cfg.radius_px = p.value("radius_px", cfg.radius_px);
        cfg.spokes = p.value("spokes", cfg.spokes);
        cfg.smooth_sigma_px = p.value("smooth_sigma_px", cfg.smooth_sigma_px);
        cfg.phantom_file = p.value("file", cfg.phantom_file);
    }
    if (j.contains("recon")) {
        const auto& r = j.at("recon");
        reject_unknown(r,
                       {"lr", "epochs", "decay_rate", "decay_every", "loss", "alpha",
                        "regularizer", "log_every", "checkpoint_every", "early_stop"},
                       "recon");
        cfg.recon.lr = r.value("lr", cfg.recon.lr);
        cfg.recon.epochs = r.value("epochs", cfg.recon.epochs);
        cfg.recon.decay_rate = r.value("decay_rate", cfg.recon.decay_rate);
        cfg.recon.decay_every = r.value("decay_every", cfg.recon.decay_every);
        if (r.contains("loss")) cfg.recon.loss = loss_from_name(r.at("loss").get<std::string>());
        cfg.recon.alpha = r.value("alpha", cfg.recon.alpha);
        if (r.contains("regularizer"))
            cfg.recon.regularizer = reg_from_name(r.at("regularizer").get<std::string>());
        cfg.recon.log_every = r.value("log_every", cfg.recon.log_every);
        cfg.recon.checkpoint_every = r.value("checkpoint_every", cfg.recon.checkpoint_every);
        cfg.recon.early_stop = r.value("early_stop", cfg.recon.early_stop);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.deterministic = j.value("deterministic", cfg.deterministic);
    cfg.recon.seed = Seed{cfg.seed};
    cfg.recon.deterministic = cfg.deterministic;

    validate_grid(cfg.grid);
    validate_recon_config(cfg.recon);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("config file not found: " + path);
    return parse_run_config(json::parse(in));
}

double resolved_k0_factor(const RunConfig& cfg) {
    if (cfg.k0_factor) return *cfg.k0_factor;
    // linear SIM defaults to near-diffraction-limited fringes; NL-SIM places
    // the 3rd harmonic at 2 f_det
    return cfg.modality == "nlsim" ? 2.0 / 3.0 : 0.9;
}

OpticalModel make_optics(const RunConfig& cfg) {
    OpticalModel m;
    m.na = cfg.na;
    m.wavelength_nm = cfg.wavelength_nm;
    m.grid = cfg.grid;
    validate_optical_model(m);
    return m;
}

PatternSet make_patterns(const RunConfig& cfg) {
    const OpticalModel optics = make_optics(cfg);
    const Modality m = modality_from_name(cfg.modality);
    const double k0 = resolved_k0_factor(cfg) * optics.f_det();
    switch (m) {
        case Modality::LinearSIM:
            return gen_linear_sim(cfg.grid, k0, cfg.modulation);
        case Modality::NLSIM:
            return gen_nlsim(cfg.grid, k0, cfg.harmonics);
        case Modality::LPSIM:
            return gen_lpsim_proxy(cfg.grid, cfg.lattice_pitch_nm, cfg.hotspot_fwhm_nm);
        case Modality::Custom: {
            if (cfg.pattern_file.empty())
                throw std::invalid_argument("config: custom modality needs patterns.file");
            PatternSet set = load_patterns(cfg.pattern_file);
            if (!(set.stack.grid == cfg.grid))
                throw std::invalid_argument("config: pattern file grid does not match");
            return set;
        }
    }
    throw std::logic_error("unreachable");
}

Phantom make_phantom(const RunConfig& cfg) {
    const OpticalModel optics = make_optics(cfg);
    Phantom raw;
    if (cfg.phantom_kind == "two_line") {
        const double separation_nm = cfg.separation_abbe * optics.abbe_limit_nm();
        raw = gen_two_line_phantom(cfg.grid, separation_nm, cfg.line_width_px,
                                   cfg.orientation == "horizontal" ? Orientation::Horizontal
                                                                   : Orientation::Vertical);
    } else if (cfg.phantom_kind == "filaments") {
        raw = gen_filament_phantom(cfg.grid, cfg.count, cfg.curvature, Seed{cfg.seed});
    } else if (cfg.phantom_kind == "dots") {
        raw = gen_dot_phantom(cfg.grid, cfg.count, cfg.radius_px, Seed{cfg.seed});
    } else if (cfg.phantom_kind == "siemens") {
        raw = gen_siemens_star(cfg.grid, cfg.spokes);
    } else if (cfg.phantom_kind == "file") {
        if (cfg.phantom_file.empty())
            throw std::invalid_argument("config: phantom kind 'file' needs phantom.file");
        ImageStack s = load_raster(cfg.phantom_file);
        if (s.frames.empty()) throw std::invalid_argument("phantom file has no frames");
        raw.image = s.frame(0);
        raw.description = "file(" + cfg.phantom_file + ")";
    } else {
        throw std::invalid_argument(
            "config: unknown phantom kind '" + cfg.phantom_kind +
            "' (valid: two_line, filaments, dots, siemens, file)");
    }
    const std::string desc = raw.description;
    Phantom prepared = prepare_ground_truth(raw.image, cfg.smooth_sigma_px);
    prepared.description = desc + " + " + prepared.description;
    return prepared;
}

json run_config_to_json(const RunConfig& cfg) {
    json j = {
        {"grid",
         {{"width", cfg.grid.width}, {"height", cfg.grid.height}, {"pitch_nm", cfg.grid.pitch_nm}}},
        {"optics", {{"na", cfg.na}, {"wavelength_nm", cfg.wavelength_nm}}},
        {"patterns",
         {{"modality", cfg.modality},
          {"k0_factor", resolved_k0_factor(cfg)},
          {"modulation", cfg.modulation},
          {"harmonics", cfg.harmonics},
          {"lattice_pitch_nm", cfg.lattice_pitch_nm},
          {"hotspot_fwhm_nm", cfg.hotspot_fwhm_nm},
          {"file", cfg.pattern_file}}},
        {"acquisition", {{"downsample", cfg.downsample}}},
        {"phantom",
         {{"kind", cfg.phantom_kind},
          {"separation_abbe", cfg.separation_abbe},
          {"line_width_px", cfg.line_width_px},
          {"orientation", cfg.orientation},
          {"count", cfg.count},
          {"curvature", cfg.curvature},
          {"radius_px", cfg.radius_px},
          {"spokes", cfg.spokes},
          {"smooth_sigma_px", cfg.smooth_sigma_px},
          {"file", cfg.phantom_file}}},
        {"recon",
         {{"lr", cfg.recon.lr},
          {"epochs", cfg.recon.epochs},
          {"decay_rate", cfg.recon.decay_rate},
          {"decay_every", cfg.recon.decay_every},
          {"loss", loss_name(cfg.recon.loss)},
          {"alpha", cfg.recon.alpha},
          {"regularizer", reg_name(cfg.recon.regularizer)},
          {"log_every", cfg.recon.log_every},
          {"checkpoint_every", cfg.recon.checkpoint_every},
          {"early_stop", cfg.recon.early_stop}}},
        {"seed", cfg.seed},
        {"deterministic", cfg.deterministic},
    };
    if (cfg.snr)
        j["acquisition"]["snr"] = *cfg.snr;
    else
        j["acquisition"]["snr"] = nullptr;
    return j;
}

namespace {

RunConfig config_from_options(const CliOptions& opt) {
    RunConfig cfg;
    if (!opt.config_path.empty()) cfg = load_run_config(opt.config_path);
    if (opt.seed) {
        cfg.seed = *opt.seed;
        cfg.recon.seed = Seed{cfg.seed};
    }
    if (opt.deterministic) {
        cfg.deterministic = true;
        cfg.recon.deterministic = true;
    }
    if (opt.lr) cfg.recon.lr = *opt.lr;
    if (opt.epochs) cfg.recon.epochs = *opt.epochs;
    if (opt.quick) cfg.recon.epochs = std::min(cfg.recon.epochs, 400);
    if (opt.snr) cfg.snr = *opt.snr;
    validate_recon_config(cfg.recon);
    return cfg;
}

void require_run_file(const std::string& dir, const std::string& name) {
    if (!fs::exists(dir + "/" + name))
        throw MissingInputError("missing input: " + dir + "/" + name);
}

int guarded(const char* what, const std::function<int()>& body) {
    try {
        return body();
    } catch (const MissingInputError& e) {
        std::cerr << what << ": " << e.what() << "\n";
        return 2;
    } catch (const NonFiniteLossError& e) {
        std::cerr << what << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << what << ": " << e.what() << "\n";
        return 1;
    }
}

json load_manifest(const std::string& dir) {
    require_run_file(dir, "manifest.json");
    std::ifstream in(dir + "/manifest.json");
    return json::parse(in);
}

void write_manifest(const std::string& dir, const json& j) {
    std::ofstream out(dir + "/manifest.json", std::ios::trunc);
    out << j.dump(2) << "\n";
}

// two_line geometry recorded at simulate time so evaluation does not need to
// regenerate the phantom
json geometry_json(const RunConfig& cfg) {
    const OpticalModel optics = make_optics(cfg);
    const double separation_nm = cfg.separation_abbe * optics.abbe_limit_nm();
    const TwoLineGeometry geo = two_line_geometry(
        cfg.grid, separation_nm,
        cfg.orientation == "horizontal" ? Orientation::Horizontal : Orientation::Vertical);
    return {{"orientation", cfg.orientation},
            {"first_px", geo.first_px},
            {"second_px", geo.second_px},
            {"separation_nm", geo.separation_nm}};
}

TwoLineGeometry geometry_from_json(const json& j) {
    TwoLineGeometry geo;
    geo.orientation = j.at("orientation").get<std::string>() == "horizontal"
                          ? Orientation::Horizontal
                          : Orientation::Vertical;
    geo.first_px = j.at("first_px").get<int>();
    geo.second_px = j.at("second_px").get<int>();
    geo.separation_nm = j.at("separation_nm").get<double>();
    return geo;
}

} // namespace

int cmd_patterns(const CliOptions& opt) {
    return guarded("patterns", [&]() {
        const RunConfig cfg = config_from_options(opt);
        const PatternSet set = make_patterns(cfg);
        fs::create_directories(opt.out_dir);
        save_patterns(set, opt.out_dir + "/patterns");
        for (int i = 0; i < set.count(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "/pattern_%03d.pgm", i);
            save_pgm16(set.stack.frame(i), opt.out_dir + name);
        }
        json manifest = {{"config", run_config_to_json(cfg)},
                         {"f_ill_cyc_per_nm", set.f_ill},
                         {"frames", set.count()}};
        write_manifest(opt.out_dir, manifest);
        std::cout << "patterns: " << set.count() << " frames, f_ill = " << set.f_ill
                  << " cyc/nm -> " << opt.out_dir << "\n";
        return 0;
    });
}

int cmd_simulate(const CliOptions& opt) {
    return guarded("simulate", [&]() {
        const RunConfig cfg = config_from_options(opt);
        const OpticalModel optics = make_optics(cfg);

        AcquisitionSpec spec;
        spec.optics = optics;
        spec.patterns = make_patterns(cfg);
        spec.downsample = cfg.downsample;
        spec.snr = cfg.snr;
        spec.seed = Seed{cfg.seed};

        const Phantom phantom = make_phantom(cfg);
        const Simulation sim = simulate_acquisition(phantom, spec);
        save_simulation(sim, spec, opt.out_dir);
        save_pgm16(sim.widefield, opt.out_dir + "/widefield.pgm");
        save_pgm16(sim.ground_truth, opt.out_dir + "/ground_truth.pgm");

        json manifest = load_manifest(opt.out_dir);
        manifest["config"] = run_config_to_json(cfg);
        manifest["phantom_description"] = phantom.description;
        manifest["f_det_cyc_per_nm"] = optics.f_det();
        manifest["abbe_limit_nm"] = optics.abbe_limit_nm();
        manifest["predicted_improvement"] =
            predicted_resolution(optics.f_det(), spec.patterns.f_ill).improvement;
        if (cfg.phantom_kind == "two_line") manifest["two_line"] = geometry_json(cfg);
        write_manifest(opt.out_dir, manifest);

        std::cout << "simulate: " << sim.subframes.frames.size() << " sub-frames -> "
                  << opt.out_dir << "\n";
        return 0;
    });
}

int cmd_reconstruct(const CliOptions& opt) {
    return guarded("reconstruct", [&]() {
        const std::string dir = opt.run_dir.empty() ? opt.out_dir : opt.run_dir;
        require_run_file(dir, "subframes.json");
        require_run_file(dir, "subframes.f32");
        require_run_file(dir, "patterns.json");
        require_run_file(dir, "patterns.f32");
        json manifest = load_manifest(dir);

        RunConfig cfg = parse_run_config(manifest.at("config"));
        if (opt.seed) {
            cfg.seed = *opt.seed;
            cfg.recon.seed = Seed{cfg.seed};
        }
        if (opt.lr) cfg.recon.lr = *opt.lr;
        if (opt.epochs) cfg.recon.epochs = *opt.epochs;
        if (opt.quick) cfg.recon.epochs = std::min(cfg.recon.epochs, 400);
        if (opt.deterministic) cfg.recon.deterministic = true;
        validate_recon_config(cfg.recon);

        const ImageStack measured = load_raster(dir + "/subframes");
        const PatternSet patterns = load_patterns(dir + "/patterns");
        const OpticalModel optics = make_optics(cfg);

        const ReconResult result =
            reconstruct(measured, patterns, optics, cfg.downsample, cfg.recon, dir);

        ImageStack out;
        out.push(result.estimate);
        out.labels = {"content=reconstruction"};
        save_raster(out, dir + "/reconstruction");
        save_pgm16(result.estimate, dir + "/reconstruction.pgm");
        ImageStack best;
        best.push(result.best_estimate);
        best.labels = {"content=reconstruction_best",
                       "epoch=" + std::to_string(result.best_epoch)};
        save_raster(best, dir + "/reconstruction_best");

        manifest["config"] = run_config_to_json(cfg);
        manifest["reconstruction"] = {
            {"epochs_run", result.report.loss.size()},
            {"final_loss", result.report.final_loss},
            {"best_loss", result.best_loss},
            {"best_epoch", result.best_epoch},
            {"lr", cfg.recon.lr},
        };
        write_manifest(dir, manifest);

        std::cout << "reconstruct: " << result.report.loss.size()
                  << " epochs, final loss " << result.report.final_loss << " -> " << dir
                  << "\n";
        return 0;
    });
}

int cmd_evaluate(const CliOptions& opt) {
    return guarded("evaluate", [&]() {
        const std::string dir = opt.run_dir.empty() ? opt.out_dir : opt.run_dir;
        require_run_file(dir, "reconstruction.json");
        require_run_file(dir, "widefield.json");
        const json manifest = load_manifest(dir);

        const Raster recon = load_raster(dir + "/reconstruction").frame(0);
        const Raster widefield = load_raster(dir + "/widefield").frame(0);
        const int ds = manifest.at("config").at("acquisition").at("downsample").get<int>();
        const Raster widefield_up = upsample_bilinear(widefield, ds);

        json out;
        const bool have_gt = fs::exists(dir + "/ground_truth.json");
        if (have_gt) {
            const Raster gt = load_raster(dir + "/ground_truth").frame(0);
            // compare on a common [0,1] footing: the estimate's scale is
            // arbitrary, so normalize both to unit max
            auto unit = [](const Raster& r) {
                ImageStack s;
                s.push(r);
                return normalize_unit(s).frame(0);
            };
            const Raster gtn = unit(gt);
            const auto mr = metrics::compare(unit(recon), gtn, "ground_truth");
            out["reconstruction_vs_ground_truth"] = {
                {"psnr_db", mr.psnr_db}, {"ssim", mr.ssim}, {"nrmse", mr.nrmse}};
            const auto mw = metrics::compare(unit(widefield_up), gtn, "ground_truth");
            out["widefield_vs_ground_truth"] = {
                {"psnr_db", mw.psnr_db}, {"ssim", mw.ssim}, {"nrmse", mw.nrmse}};
        }

        // spectral support on native grids (no resampling artifacts)
        const auto ss_recon = metrics::spectral_support(recon);
        const auto ss_wf = metrics::spectral_support(widefield);
        out["spectral_support"] = {
            {"reconstruction_cutoff_cyc_per_nm", ss_recon.cutoff_cyc_per_nm},
            {"widefield_cutoff_cyc_per_nm", ss_wf.cutoff_cyc_per_nm},
            {"ratio", ss_wf.cutoff_cyc_per_nm > 0
                          ? ss_recon.cutoff_cyc_per_nm / ss_wf.cutoff_cyc_per_nm
                          : 0.0},
        };
        if (manifest.contains("f_det_cyc_per_nm"))
            out["spectral_support"]["f_det_cyc_per_nm"] = manifest.at("f_det_cyc_per_nm");

        if (manifest.contains("two_line")) {
            const TwoLineGeometry geo = geometry_from_json(manifest.at("two_line"));
            // a flat image (e.g. an unconverged reconstruction) is simply
            // unresolved, not an evaluation failure
            auto safe_resolve = [&](const Raster& img) {
                try {
                    return metrics::two_line_resolved(img, geo);
                } catch (const std::invalid_argument&) {
                    return metrics::ResolvabilityResult{};
                }
            };
            const auto rr = safe_resolve(recon);
            const auto rw = safe_resolve(widefield_up);
            out["two_line"] = {
                {"separation_nm", geo.separation_nm},
                {"reconstruction",
                 {{"resolved", rr.resolved}, {"dip_contrast", rr.dip_contrast}}},
                {"widefield",
                 {{"resolved", rw.resolved}, {"dip_contrast", rw.dip_contrast}}},
            };

            // full-width profiles across the pair, one CSV per image
            const bool vertical = geo.orientation == Orientation::Vertical;
            auto write_profile = [&](const Raster& img, const std::string& name) {
                const int extent = vertical ? img.grid.width : img.grid.height;
                const double mid =
                    ((vertical ? img.grid.height : img.grid.width) - 1) / 2.0;
                auto pt = [&](double c) {
                    return vertical ? std::pair<double, double>{c, mid}
                                    : std::pair<double, double>{mid, c};
                };
                const int samples = extent * 2;
                const auto prof =
                    metrics::line_profile(img, pt(0), pt(extent - 1), samples);
                std::ofstream csv(dir + "/profile_" + name + ".csv", std::ios::trunc);
                csv << "position_nm,value\n";
                for (int i = 0; i < samples; ++i) {
                    const double px = double(i) / (samples - 1) * (extent - 1);
                    csv << px * img.grid.pitch_nm << "," << prof[size_t(i)] << "\n";
                }
            };
            write_profile(recon, "reconstruction");
            write_profile(widefield_up, "widefield");
            if (have_gt) write_profile(load_raster(dir + "/ground_truth").frame(0),
                                       "ground_truth");
        }

        std::ofstream mj(dir + "/metrics.json", std::ios::trunc);
        mj << out.dump(2) << "\n";
        std::cout << "evaluate: metrics.json written -> " << dir << "\n";
        return 0;
    });
}

int cmd_snr_sweep(const CliOptions& opt) {
    return guarded("snr-sweep", [&]() {
        std::vector<double> snrs = opt.snr_list;
        if (snrs.empty()) snrs = {20.0, 15.0, 12.0, 10.0, 7.5, 5.0};

        fs::create_directories(opt.out_dir);
        std::ofstream csv(opt.out_dir + "/snr_sweep.csv", std::ios::trunc);
        csv << "snr,psnr_db,ssim,nrmse,resolved,dip_contrast\n";

        for (double snr : snrs) {
            CliOptions sub = opt;
            char label[32];
            std::snprintf(label, sizeof label, "snr_%g", snr);
            sub.out_dir = opt.out_dir + "/" + label;
            sub.run_dir.clear();
            sub.snr = snr;
            if (int rc = cmd_simulate(sub)) return rc;
            if (int rc = cmd_reconstruct(sub)) return rc;
            if (int rc = cmd_evaluate(sub)) return rc;

            std::ifstream mj(sub.out_dir + "/metrics.json");
            const json m = json::parse(mj);
            const auto& gt = m.at("reconstruction_vs_ground_truth");
            csv << snr << "," << gt.at("psnr_db").get<double>() << ","
                << gt.at("ssim").get<double>() << "," << gt.at("nrmse").get<double>();
            if (m.contains("two_line")) {
                const auto& tl = m.at("two_line").at("reconstruction");
                csv << "," << (tl.at("resolved").get<bool>() ? 1 : 0) << ","
                    << tl.at("dip_contrast").get<double>();
            } else {
                csv << ",,";
            }
            csv << "\n";
            csv.flush();
        }
        std::cout << "snr-sweep: " << snrs.size() << " runs -> " << opt.out_dir
                  << "/snr_sweep.csv\n";
        return 0;
    });
}

int cmd_resolution_sweep(const CliOptions& opt) {
    return guarded("resolution-sweep", [&]() {
        if (opt.separation_list.empty())
            throw std::invalid_argument("resolution-sweep: empty separation list");

        fs::create_directories(opt.out_dir);
        std::ofstream csv(opt.out_dir + "/resolution_sweep.csv", std::ios::trunc);
        csv << "separation_abbe,widefield_resolved,widefield_dip,"
               "reconstruction_resolved,reconstruction_dip\n";

        for (double sep : opt.separation_list) {
            CliOptions sub = opt;
            char label[32];
            std::snprintf(label, sizeof label, "sep_%g", sep);
            sub.out_dir = opt.out_dir + "/" + label;
            sub.run_dir.clear();

            // rewrite the phantom separation through a derived config file
            RunConfig cfg = config_from_options(opt);
            cfg.phantom_kind = "two_line";
            cfg.separation_abbe = sep;
            fs::create_directories(sub.out_dir);
            {
                std::ofstream cj(sub.out_dir + "/config.json", std::ios::trunc);
                cj << run_config_to_json(cfg).dump(2) << "\n";
            }
            sub.config_path = sub.out_dir + "/config.json";
            if (int rc = cmd_simulate(sub)) return rc;
            if (int rc = cmd_reconstruct(sub)) return rc;
            if (int rc = cmd_evaluate(sub)) return rc;

            std::ifstream mj(sub.out_dir + "/metrics.json");
            const json m = json::parse(mj);
            const auto& tl = m.at("two_line");
            csv << sep << "," << (tl.at("widefield").at("resolved").get<bool>() ? 1 : 0)
                << "," << tl.at("widefield").at("dip_contrast").get<double>() << ","
                << (tl.at("reconstruction").at("resolved").get<bool>() ? 1 : 0) << ","
                << tl.at("reconstruction").at("dip_contrast").get<double>() << "\n";
            csv.flush();
        }
        std::cout << "resolution-sweep: " << opt.separation_list.size() << " runs -> "
                  << opt.out_dir << "/resolution_sweep.csv\n";
        return 0;
    });
}

} // namespace simrecon::cli
