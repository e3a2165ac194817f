// Command-line driver for the EIT pipeline: synthetic dataset generation,
// operator-network training, reconstruction with both methods, and the noise
// study. All outputs embed the effective run configuration.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <vector>

#include "eit/config.hpp"
#include "eit/deeponet.hpp"
#include "eit/eval.hpp"
#include "eit/fem.hpp"
#include "eit/io.hpp"
#include "eit/irgn.hpp"
#include "eit/mesh.hpp"
#include "eit/parallel.hpp"
#include "eit/phantom.hpp"
#include "eit/rng.hpp"

namespace fs = std::filesystem;
using namespace eit;

namespace {

struct Scene {
    Mesh data_mesh;
    ElectrodeLayout data_layout;
    Mesh inv_mesh;
    ElectrodeLayout inv_layout;
};

Scene build_scene(const RunConfig& config) {
    Scene scene;
    scene.data_mesh = build_disk_mesh(config.mesh.target_h);
    scene.data_layout = place_electrodes(scene.data_mesh, config.electrodes.M,
                                         config.electrodes.coverage, config.electrodes.z);
    scene.inv_mesh = build_disk_mesh(config.mesh.inversion_target_h);
    scene.inv_layout = place_electrodes(scene.inv_mesh, config.electrodes.M,
                                        config.electrodes.coverage, config.electrodes.z);
    return scene;
}

int anomaly_class_of(std::int64_t index, const std::vector<int>& counts) {
    std::int64_t acc = 0;
    for (int cls = 0; cls < 4; ++cls) {
        acc += counts[static_cast<std::size_t>(cls)];
        if (index < acc) return cls + 1;
    }
    throw std::logic_error("record index out of range");
}

void require_free_or_overwrite(const fs::path& path, bool overwrite) {
    if (fs::exists(path) && !overwrite)
        throw std::runtime_error(path.string() +
                                 " exists; pass --overwrite to replace it");
}

Phantom default_study_phantom() {
    Phantom phantom;
    phantom.anomalies.push_back({{0.3, 0.0}, 0.2, 2.0});
    return phantom;
}

int cmd_gen_data(const RunConfig& config, const std::string& out_path, bool resume) {
    const Scene scene = build_scene(config);
    const MeasurementFrame background =
        forward(scene.data_mesh, scene.data_layout, uniform_sigma(scene.data_mesh, 1.0));

    DatasetHeader header;
    header.mesh_id = scene.data_mesh.fingerprint();
    header.M = static_cast<std::uint32_t>(config.electrodes.M);
    for (int i = 0; i < 4; ++i)
        header.counts[i] = static_cast<std::uint32_t>(config.dataset.counts[static_cast<std::size_t>(i)]);
    header.seed = config.dataset.seed;
    header.config_json = config_to_json(config);

    std::int64_t total = 0;
    for (int c : config.dataset.counts) total += c;

    DatasetWriter writer(out_path, header, resume);
    std::int64_t next = writer.n_existing();
    if (next > 0) std::cout << "resuming at record " << next << "\n";

    const int chunk = 256;
    std::vector<DatasetRecord> buffer;
    while (next < total) {
        const std::int64_t hi = std::min<std::int64_t>(next + chunk, total);
        buffer.assign(static_cast<std::size_t>(hi - next), {});
        parallel_for(static_cast<int>(next), static_cast<int>(hi), [&](int i) {
            DatasetRecord& rec = buffer[static_cast<std::size_t>(i - next)];
            const int n_anom = anomaly_class_of(i, config.dataset.counts);
            rec.phantom = sample_phantom(derive_seed(config.dataset.seed, 0xF0,
                                                     static_cast<std::uint64_t>(i)),
                                         n_anom, config.phantom);
            const SigmaField sigma = rasterize(rec.phantom, scene.data_mesh);
            rec.clean = forward(scene.data_mesh, scene.data_layout, sigma);
            rec.difference = difference_frame(rec.clean, background);
        });
        for (const auto& rec : buffer) writer.append(rec);
        next = hi;
        std::cout << "\rgenerated " << next << "/" << total << std::flush;
    }
    writer.close();
    std::cout << "\nwrote " << out_path << "\n";
    return 0;
}

int cmd_train(const RunConfig& config, const std::string& dataset_path,
              const std::string& out_path, const std::string& loss_csv_path) {
    const Dataset dataset = load_dataset(dataset_path);
    const Mesh data_mesh = build_disk_mesh(config.mesh.target_h);
    if (dataset.header.mesh_id != data_mesh.fingerprint())
        throw std::runtime_error(
            "train: dataset mesh fingerprint does not match the configured mesh "
            "(dataset " + std::to_string(dataset.header.mesh_id) + ", config " +
            std::to_string(data_mesh.fingerprint()) + ")");
    if (dataset.records.empty()) throw std::runtime_error("train: empty dataset");

    std::vector<TrainRecord> records;
    records.reserve(dataset.records.size());
    for (const auto& rec : dataset.records)
        records.push_back({rec.difference, rec.phantom});

    std::cout << "training on " << records.size() << " records, "
              << config.training.epochs << " epochs\n";
    TrainResult result = train(records, config.training);
    result.model.threshold = config.eval.threshold;
    result.model.mesh_id = dataset.header.mesh_id;

    save_model(result.model, out_path, config_to_json(config));
    std::cout << "wrote " << out_path << "\n";

    if (!loss_csv_path.empty()) {
        std::ofstream out(loss_csv_path);
        if (!out) throw std::runtime_error("train: cannot open " + loss_csv_path);
        out << "# config " << config_to_json(config) << "\n";
        out << "epoch,mean_mse\n" << std::setprecision(17);
        for (std::size_t e = 0; e < result.loss_history.size(); ++e)
            out << e << "," << result.loss_history[e] << "\n";
        std::cout << "wrote " << loss_csv_path << "\n";
    }
    return 0;
}

void write_field_csv(const std::string& path, const std::vector<double>& values,
                     const std::string& config_json) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "# config " << config_json << "\n";
    out << "tri_index,sigma\n" << std::setprecision(17);
    for (std::size_t t = 0; t < values.size(); ++t) out << t << "," << values[t] << "\n";
}

// shared 4-panel pipeline for `reconstruct` (both methods) and `irgn`
int run_reconstruction(const RunConfig& config, const std::string& checkpoint_path,
                       const std::string& frame_path, const std::string& phantom_path,
                       const std::string& out_dir, bool overwrite, bool irgn_only) {
    const Scene scene = build_scene(config);
    int frame_M = 0;
    const MeasurementFrame input = load_frame(frame_path, &frame_M);
    if (frame_M != config.electrodes.M)
        throw std::runtime_error("frame M does not match config");

    const MeasurementFrame data_bg =
        forward(scene.data_mesh, scene.data_layout, uniform_sigma(scene.data_mesh, 1.0));
    const MeasurementFrame inv_bg =
        forward(scene.inv_mesh, scene.inv_layout, uniform_sigma(scene.inv_mesh, 1.0));
    const MeasurementFrame diff =
        input.is_difference ? input : difference_frame(input, data_bg);

    std::optional<Phantom> truth;
    if (!phantom_path.empty()) {
        const auto phantoms = load_phantoms_csv(phantom_path);
        if (phantoms.empty()) throw std::runtime_error("phantom file is empty");
        truth = phantoms.front();
    }

    fs::create_directories(out_dir);
    const std::string config_json = config_to_json(config);
    auto out_file = [&](const char* name) {
        const fs::path p = fs::path(out_dir) / name;
        require_free_or_overwrite(p, overwrite);
        return p.string();
    };

    // IRGN on the inversion mesh, difference fit against its own background
    const IrgnResult irgn_result =
        irgn_reconstruct(diff, scene.inv_mesh, scene.inv_layout, config.irgn, &inv_bg);
    if (irgn_result.aborted)
        std::cerr << "warning: irgn aborted early: " << irgn_result.abort_reason << "\n";
    write_field_csv(out_file("irgn_field.csv"), irgn_result.field.values, config_json);
    {
        std::ofstream out(out_file("irgn_history.csv"));
        out << "# config " << config_json << "\n";
        out << "iter,residual,alpha,normal_eq_error\n" << std::setprecision(17);
        for (std::size_t k = 0; k < irgn_result.history.size(); ++k) {
            const auto& it = irgn_result.history[k];
            out << k << "," << it.residual_norm << "," << it.alpha << ","
                << it.normal_eq_error << "\n";
        }
    }

    std::optional<DeepONetModel> model;
    std::vector<double> don_tri_values;
    if (!irgn_only) {
        model = load_model(checkpoint_path);
        if (model->mesh_id != scene.data_mesh.fingerprint())
            std::cerr << "warning: checkpoint was trained on a different mesh\n";
        std::vector<Vec2> centroids;
        for (int t = 0; t < scene.inv_mesh.n_triangles(); ++t)
            centroids.push_back(scene.inv_mesh.centroid(t));
        const ReconstructionField don =
            reconstruct(*model, diff, centroids, model->threshold);
        don_tri_values = don.values;
        write_field_csv(out_file("deeponet_field.csv"), don.values, config_json);
    }

    // shared color range, ground truth first when present
    double lo = 0.0, hi = 0.0;
    if (truth) {
        lo = hi = Phantom::background;
        for (const auto& a : truth->anomalies) {
            lo = std::min(lo, a.value);
            hi = std::max(hi, a.value);
        }
    } else {
        auto span = [&](const std::vector<double>& v) {
            for (double x : v) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        };
        lo = hi = irgn_result.field.values.front();
        span(irgn_result.field.values);
        if (!don_tri_values.empty()) span(don_tri_values);
    }
    if (hi - lo < 1e-9) hi = lo + 1e-9;

    const int size = config.eval.image_size;
    if (truth) {
        std::vector<double> grid(static_cast<std::size_t>(size) * size, 0.0);
        for (const auto& [idx, p] : raster_points(size))
            grid[static_cast<std::size_t>(idx)] = eval_sigma(*truth, p);
        write_ppm(render_grid(grid, size, lo, hi), out_file("ground_truth.ppm"), config_json);
    }
    write_ppm(render_field(scene.inv_mesh, irgn_result.field.values, size, lo, hi),
              out_file("irgn.ppm"), config_json);
    if (model) {
        std::vector<double> grid(static_cast<std::size_t>(size) * size, 0.0);
        const auto pts = raster_points(size);
        std::vector<Vec2> coords;
        coords.reserve(pts.size());
        for (const auto& [idx, p] : pts) {
            static_cast<void>(idx);
            coords.push_back(p);
        }
        const ReconstructionField don =
            reconstruct(*model, diff, coords, model->threshold);
        for (std::size_t i = 0; i < pts.size(); ++i)
            grid[static_cast<std::size_t>(pts[i].first)] = don.values[i];
        write_ppm(render_grid(grid, size, lo, hi), out_file("deeponet.ppm"), config_json);
    }

    // 1-D cut through the first anomaly center (diameter), else the x-axis
    double cut_angle = 0.0;
    if (truth && !truth->anomalies.empty()) {
        const Vec2 c = truth->anomalies.front().center;
        if (std::hypot(c.x, c.y) > 1e-9) cut_angle = std::atan2(c.y, c.x);
    }
    const auto cut_pts = cut_points(cut_angle, {0.0, 0.0}, config.eval.cut_samples);
    const auto irgn_cut = cut_values_mesh(scene.inv_mesh, irgn_result.field.values, cut_pts);
    std::vector<double> don_cut, truth_cut;
    if (model) {
        const Eigen::VectorXd don_preds = predict(*model, diff, cut_pts);
        for (Eigen::Index i = 0; i < don_preds.size(); ++i)
            don_cut.push_back(std::max(don_preds[i], model->threshold));
    }
    if (truth) truth_cut = cut_values_phantom(*truth, cut_pts);
    {
        std::ofstream out(out_file("cut.csv"));
        out << "# config " << config_json << "\n";
        out << "t";
        if (truth) out << ",ground_truth";
        out << ",irgn";
        if (model) out << ",deeponet";
        out << "\n" << std::setprecision(17);
        for (std::size_t i = 0; i < cut_pts.size(); ++i) {
            const double t = -1.0 + 2.0 * static_cast<double>(i) /
                                        (static_cast<double>(cut_pts.size()) - 1.0);
            out << t;
            if (truth) out << "," << truth_cut[i];
            out << "," << irgn_cut[i];
            if (model) out << "," << don_cut[i];
            out << "\n";
        }
    }

    if (truth) {
        std::ofstream out(out_file("metrics.csv"));
        out << "# config " << config_json << "\n";
        out << "method,l2,weighted_l2\n" << std::setprecision(17);
        out << "irgn," << l2_error(irgn_result.field.values, *truth, scene.inv_mesh) << ","
            << weighted_l2_error(irgn_result.field.values, *truth, scene.inv_mesh) << "\n";
        if (!don_tri_values.empty())
            out << "deeponet," << l2_error(don_tri_values, *truth, scene.inv_mesh) << ","
                << weighted_l2_error(don_tri_values, *truth, scene.inv_mesh) << "\n";
    }
    std::cout << "wrote reconstruction set to " << out_dir << "\n";
    return 0;
}

int cmd_noise_study(const RunConfig& config, const std::string& checkpoint_path,
                    const std::string& phantom_path, const std::string& out_path) {
    const Scene scene = build_scene(config);
    const DeepONetModel model = load_model(checkpoint_path);
    Phantom phantom = default_study_phantom();
    if (!phantom_path.empty()) {
        const auto phantoms = load_phantoms_csv(phantom_path);
        if (phantoms.empty()) throw std::runtime_error("phantom file is empty");
        phantom = phantoms.front();
    }
    NoiseStudySetup setup{phantom,        scene.data_mesh, scene.data_layout,
                          scene.inv_mesh, scene.inv_layout, model,
                          config.irgn};
    const auto rows = noise_study(setup, config.eval.levels, config.eval.repeats,
                                  config.eval.seed);
    write_noise_study_csv(rows, out_path, config_to_json(config));
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_mesh_info(const RunConfig& config, const std::string& export_path) {
    for (const double h : {config.mesh.target_h, config.mesh.inversion_target_h}) {
        const Mesh mesh = build_disk_mesh(h);
        std::cout << "mesh target_h=" << h << ": " << mesh.n_vertices() << " vertices, "
                  << mesh.n_triangles() << " triangles, "
                  << mesh.boundary_edges.size() << " boundary edges, area "
                  << mesh.total_area() << " (pi err "
                  << std::abs(mesh.total_area() - M_PI) / M_PI << "), max edge "
                  << mesh.max_edge_length() << ", fingerprint " << mesh.fingerprint()
                  << "\n";
        const ElectrodeLayout layout = place_electrodes(
            mesh, config.electrodes.M, config.electrodes.coverage, config.electrodes.z);
        double arc = 0.0;
        for (int m = 0; m < layout.M; ++m) arc += layout.electrode_length(mesh, m);
        std::cout << "  electrodes: M=" << layout.M << " coverage=" << layout.coverage
                  << " z=" << layout.z << ", edges/electrode "
                  << layout.electrode_edges.front().size() << ", total arc " << arc
                  << "\n";
    }
    if (!export_path.empty()) {
        save_mesh_text(build_disk_mesh(config.mesh.target_h), export_path);
        std::cout << "wrote " << export_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electrical impedance tomography toolkit: complete-electrode-model "
                 "forward solver, operator-network and Gauss-Newton reconstruction"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration (flags override it)")
        ->check(CLI::ExistingFile);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    std::string gen_out = "dataset.eitd";
    bool gen_resume = false;
    std::vector<int> gen_counts;
    std::uint64_t gen_seed = 0;
    bool gen_seed_set = false;
    gen->add_option("--out", gen_out, "output dataset file");
    gen->add_flag("--resume", gen_resume, "continue an interrupted run");
    gen->add_option("--counts", gen_counts, "records per anomaly class (4 values)")
        ->expected(4);
    gen->add_option("--seed", gen_seed, "dataset seed")->each([&](const std::string&) {
        gen_seed_set = true;
    });

    // train
    auto* tr = app.add_subcommand("train", "train the operator network on a dataset");
    std::string tr_dataset, tr_out = "model.eitw", tr_loss = "loss_history.csv";
    int tr_epochs = -1;
    tr->add_option("--dataset", tr_dataset, "dataset file")->required();
    tr->add_option("--out", tr_out, "checkpoint path");
    tr->add_option("--loss-csv", tr_loss, "per-epoch loss history");
    tr->add_option("--epochs", tr_epochs, "override training epochs");

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct",
                                   "run both methods on a frame and render panels");
    std::string rec_ckpt, rec_frame, rec_phantom, rec_out = "out";
    bool rec_overwrite = false;
    rec->add_option("--checkpoint", rec_ckpt, "trained model")->required();
    rec->add_option("--frame", rec_frame, "measurement frame file")->required();
    rec->add_option("--phantom", rec_phantom, "ground-truth phantom CSV (optional)");
    rec->add_option("--out-dir", rec_out, "output directory");
    rec->add_flag("--overwrite", rec_overwrite, "replace existing outputs");

    // irgn
    auto* ir = app.add_subcommand("irgn", "Gauss-Newton reconstruction only");
    std::string ir_frame, ir_phantom, ir_out = "out";
    bool ir_overwrite = false;
    ir->add_option("--frame", ir_frame, "measurement frame file")->required();
    ir->add_option("--phantom", ir_phantom, "ground-truth phantom CSV (optional)");
    ir->add_option("--out-dir", ir_out, "output directory");
    ir->add_flag("--overwrite", ir_overwrite, "replace existing outputs");

    // noise-study
    auto* ns = app.add_subcommand("noise-study", "mean/std of both metrics over noise levels");
    std::string ns_ckpt, ns_phantom, ns_out = "noise_study.csv";
    std::vector<double> ns_levels;
    int ns_repeats = -1;
    std::uint64_t ns_seed = 0;
    bool ns_seed_set = false;
    ns->add_option("--checkpoint", ns_ckpt, "trained model")->required();
    ns->add_option("--phantom", ns_phantom, "phantom CSV (default: single anomaly)");
    ns->add_option("--out", ns_out, "output CSV");
    ns->add_option("--levels", ns_levels, "noise levels");
    ns->add_option("--repeats", ns_repeats, "repeats per level");
    ns->add_option("--seed", ns_seed, "master seed")->each([&](const std::string&) {
        ns_seed_set = true;
    });

    // mesh-info
    auto* mi = app.add_subcommand("mesh-info", "print mesh statistics");
    std::string mi_export;
    mi->add_option("--export", mi_export, "write the data mesh in text format");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (*gen) {
            if (!gen_counts.empty()) config.dataset.counts = gen_counts;
            if (gen_seed_set) config.dataset.seed = gen_seed;
            return cmd_gen_data(config, gen_out, gen_resume);
        }
        if (*tr) {
            if (tr_epochs > 0) config.training.epochs = tr_epochs;
            return cmd_train(config, tr_dataset, tr_out, tr_loss);
        }
        if (*rec)
            return run_reconstruction(config, rec_ckpt, rec_frame, rec_phantom, rec_out,
                                      rec_overwrite, false);
        if (*ir)
            return run_reconstruction(config, "", ir_frame, ir_phantom, ir_out,
                                      ir_overwrite, true);
        if (*ns) {
            if (!ns_levels.empty()) config.eval.levels = ns_levels;
            if (ns_repeats > 0) config.eval.repeats = ns_repeats;
            if (ns_seed_set) config.eval.seed = ns_seed;
            return cmd_noise_study(config, ns_ckpt, ns_phantom, ns_out);
        }
        if (*mi) return cmd_mesh_info(config, mi_export);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
