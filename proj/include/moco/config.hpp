#pragma once

#include "moco/consistency.hpp"
#include "moco/geometry.hpp"
#include "moco/iqm.hpp"
#include "moco/motion.hpp"
#include "moco/optim.hpp"
#include "moco/phantom.hpp"

#include <string>
#include <vector>

namespace moco {

struct SimulateConfig {
    double amplitude_mm = 5.0;
    double amplitude_deg = 2.0;
    MotionFamily family = MotionFamily::in_plane;
    int n_nodes = 10;
    double noise_sigma = 0.0;
    int supersample = 3; // pixel-footprint sub-rays per axis
};

struct TrainSetConfig {
    int n_samples = 500;
    int epochs = 60;
    int batch = 32;
    double lr = 1e-3;
    double val_fraction = 0.2;
    double amp_mm_min = 0.0, amp_mm_max = 8.0;
    double amp_deg_min = 0.0, amp_deg_max = 3.0;
    int n_nodes = 10;
    MotionFamily family = MotionFamily::mixed;
};

/// One Table-style compensation method: which IQM drives the objective and
/// whether the consistency term is on (lambda < 0 selects auto balancing,
/// 0 disables ECC).
struct MethodConfig {
    std::string name = "proposed";
    IqmKind iqm = IqmKind::regressor;
    double lambda = -1.0;
};

/// A full experiment; one JSON file, one unit of reproduction.
struct Config {
    std::string name = "default";
    uint64_t seed = 1;
    bool deterministic = true;
    CircularGeometry geometry;
    Phantom phantom;
    GridSpec volume_grid;
    SimulateConfig simulate;
    EstimationConfig estimate;
    EccSettings ecc;
    std::vector<MethodConfig> methods;
    std::string model_file = "model.rpem";
    TrainSetConfig train;

    GridSpec slice_grid() const; // z = 0 plane of the volume grid
    void validate() const;
};

Config default_config();
Config load_config(const std::string& path);
std::string config_to_json(const Config& cfg);

/// FNV-1a of the canonical JSON serialization; stamped into every manifest.
uint64_t config_hash(const Config& cfg);

const char* family_name(MotionFamily f);
MotionFamily family_from_name(const std::string& name);

} // namespace moco
