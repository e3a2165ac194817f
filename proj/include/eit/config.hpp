#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eit/deeponet.hpp"
#include "eit/irgn.hpp"
#include "eit/phantom.hpp"

namespace eit {

// Declarative run configuration. Every field has a default; a JSON config
// file overrides defaults and CLI flags override the file. The effective
// config is serialized into every artifact for provenance.
struct RunConfig {
    struct MeshCfg {
        double target_h = 0.04;            // data-generation mesh
        double inversion_target_h = 0.08;  // reconstruction mesh
    } mesh;

    struct ElectrodeCfg {
        int M = 16;
        double coverage = 0.5;
        double z = 0.1;
    } electrodes;

    PhantomRanges phantom;

    struct DatasetCfg {
        std::vector<int> counts = {4096, 4096, 4096, 4096};  // per anomaly class 1..4
        std::uint64_t seed = 1234;
    } dataset;

    TrainConfig training;

    IrgnConfig irgn;

    struct EvalCfg {
        std::vector<double> levels = {0.01, 0.02, 0.03, 0.04, 0.05, 0.09};
        int repeats = 10;
        std::uint64_t seed = 7;
        double threshold = 0.1;
        int image_size = 256;
        int cut_samples = 401;
    } eval;

    struct PathCfg {
        std::string out_dir = "out";
    } paths;
};

std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);  // defaults overlaid with the file

}  // namespace eit
