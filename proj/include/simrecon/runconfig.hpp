#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simrecon/forward.hpp"
#include "simrecon/reconstruct.hpp"

// Run configuration (JSON, unknown keys rejected) and the command entry
// points behind the CLI. Commands return process exit codes:
//   0 success, 1 config error, 2 missing input, 3 numeric failure.

namespace simrecon::cli {

struct MissingInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    GridSpec grid{128, 128, 15.0};
    double na = 1.4;
    double wavelength_nm = 525.0;

    std::string modality = "linear";       // linear | nlsim | lpsim | custom
    std::optional<double> k0_factor;       // k0 = k0_factor * f_det; default per modality
    double modulation = 1.0;
    std::vector<double> harmonics{1.0, 0.5, 0.25};
    double lattice_pitch_nm = 220.0;
    double hotspot_fwhm_nm = 105.0;
    std::string pattern_file;              // custom modality: RAW32 path

    int downsample = 2;
    std::optional<double> snr = 20.0;      // null disables noise

    std::string phantom_kind = "two_line"; // two_line|filaments|dots|siemens|file
    double separation_abbe = 0.55;         // two_line, fraction of the Abbe distance
    int line_width_px = 2;
    std::string orientation = "vertical";
    int count = 12;                        // filaments/dots
    double curvature = 1.0;
    double radius_px = 3.0;
    int spokes = 16;
    double smooth_sigma_px = 1.0;
    std::string phantom_file;

    ReconConfig recon;

    uint64_t seed = 1234;
    bool deterministic = true;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg); // fully resolved echo

double resolved_k0_factor(const RunConfig& cfg);
OpticalModel make_optics(const RunConfig& cfg);
PatternSet make_patterns(const RunConfig& cfg);
Phantom make_phantom(const RunConfig& cfg);

struct CliOptions {
    std::string config_path; // optional JSON config
    std::string out_dir = "run";
    std::string run_dir;     // reconstruct/evaluate input directory
    std::optional<uint64_t> seed;
    bool deterministic = false;
    bool quick = false;      // cap epochs at 400
    std::optional<double> lr;
    std::optional<int> epochs;
    std::optional<double> snr;
    std::vector<double> snr_list;
    std::vector<double> separation_list; // fractions of the Abbe distance
};

int cmd_patterns(const CliOptions& opt);
int cmd_simulate(const CliOptions& opt);
int cmd_reconstruct(const CliOptions& opt);
int cmd_evaluate(const CliOptions& opt);
int cmd_snr_sweep(const CliOptions& opt);
int cmd_resolution_sweep(const CliOptions& opt);

} // namespace simrecon::cli
