#include "eit/config.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace eit {

namespace {

using nlohmann::json;

template <typename T>
void fetch(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

std::string config_to_json(const RunConfig& c) {
    json j;
    j["mesh"] = {{"target_h", c.mesh.target_h},
                 {"inversion_target_h", c.mesh.inversion_target_h}};
    j["electrodes"] = {{"M", c.electrodes.M},
                       {"coverage", c.electrodes.coverage},
                       {"z", c.electrodes.z}};
    j["phantom"] = {{"radius_lo", c.phantom.radius_lo},
                    {"radius_hi", c.phantom.radius_hi},
                    {"value_lo", c.phantom.value_lo},
                    {"value_gap_lo", c.phantom.value_gap_lo},
                    {"value_gap_hi", c.phantom.value_gap_hi},
                    {"value_hi", c.phantom.value_hi},
                    {"margin", c.phantom.margin},
                    {"separation", c.phantom.separation}};
    j["dataset"] = {{"counts", c.dataset.counts}, {"seed", c.dataset.seed}};
    j["training"] = {{"epochs", c.training.epochs},
                     {"batch_size", c.training.batch_size},
                     {"n_points", c.training.n_points},
                     {"lr", c.training.lr},
                     {"lr_decay", c.training.lr_decay},
                     {"seed", c.training.seed}};
    j["irgn"] = {{"max_iters", c.irgn.max_iters},
                 {"alpha0_rel", c.irgn.alpha0_rel},
                 {"q", c.irgn.q},
                 {"sigma_init", c.irgn.sigma_init},
                 {"box_lo", c.irgn.box_lo},
                 {"box_hi", c.irgn.box_hi},
                 {"tol", c.irgn.tol}};
    j["eval"] = {{"levels", c.eval.levels},
                 {"repeats", c.eval.repeats},
                 {"seed", c.eval.seed},
                 {"threshold", c.eval.threshold},
                 {"image_size", c.eval.image_size},
                 {"cut_samples", c.eval.cut_samples}};
    j["paths"] = {{"out_dir", c.paths.out_dir}};
    j["format_version"] = 1;
    return j.dump();
}

RunConfig config_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.contains("format_version") && j.at("format_version").get<int>() != 1)
        throw std::runtime_error("config: unsupported format_version");
    RunConfig c;
    if (j.contains("mesh")) {
        const auto& m = j.at("mesh");
        fetch(m, "target_h", c.mesh.target_h);
        fetch(m, "inversion_target_h", c.mesh.inversion_target_h);
    }
    if (j.contains("electrodes")) {
        const auto& e = j.at("electrodes");
        fetch(e, "M", c.electrodes.M);
        fetch(e, "coverage", c.electrodes.coverage);
        fetch(e, "z", c.electrodes.z);
    }
    if (j.contains("phantom")) {
        const auto& p = j.at("phantom");
        fetch(p, "radius_lo", c.phantom.radius_lo);
        fetch(p, "radius_hi", c.phantom.radius_hi);
        fetch(p, "value_lo", c.phantom.value_lo);
        fetch(p, "value_gap_lo", c.phantom.value_gap_lo);
        fetch(p, "value_gap_hi", c.phantom.value_gap_hi);
        fetch(p, "value_hi", c.phantom.value_hi);
        fetch(p, "margin", c.phantom.margin);
        fetch(p, "separation", c.phantom.separation);
    }
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        fetch(d, "counts", c.dataset.counts);
        fetch(d, "seed", c.dataset.seed);
        if (c.dataset.counts.size() != 4)
            throw std::runtime_error("config: dataset.counts needs 4 entries");
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        fetch(t, "epochs", c.training.epochs);
        fetch(t, "batch_size", c.training.batch_size);
        fetch(t, "n_points", c.training.n_points);
        fetch(t, "lr", c.training.lr);
        fetch(t, "lr_decay", c.training.lr_decay);
        fetch(t, "seed", c.training.seed);
    }
    if (j.contains("irgn")) {
        const auto& i = j.at("irgn");
        fetch(i, "max_iters", c.irgn.max_iters);
        fetch(i, "alpha0_rel", c.irgn.alpha0_rel);
        fetch(i, "q", c.irgn.q);
        fetch(i, "sigma_init", c.irgn.sigma_init);
        fetch(i, "box_lo", c.irgn.box_lo);
        fetch(i, "box_hi", c.irgn.box_hi);
        fetch(i, "tol", c.irgn.tol);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        fetch(e, "levels", c.eval.levels);
        fetch(e, "repeats", c.eval.repeats);
        fetch(e, "seed", c.eval.seed);
        fetch(e, "threshold", c.eval.threshold);
        fetch(e, "image_size", c.eval.image_size);
        fetch(e, "cut_samples", c.eval.cut_samples);
    }
    if (j.contains("paths")) fetch(j.at("paths"), "out_dir", c.paths.out_dir);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return config_from_json(text);
}

}  // namespace eit
