#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eit/irgn.hpp"
#include "eit/phantom.hpp"

using namespace eit;

namespace {

struct Scene {
    Mesh mesh;
    ElectrodeLayout layout;
};

Scene make_scene(double h) {
    Scene s;
    s.mesh = build_disk_mesh(h);
    s.layout = place_electrodes(s.mesh, 16, 0.5, 0.1);
    return s;
}

Phantom one_anomaly() {
    Phantom p;
    p.anomalies.push_back({{0.3, 0.0}, 0.2, 2.0});
    return p;
}

}  // namespace

TEST_CASE("noiseless background frame is a fixed point") {
    const Scene s = make_scene(0.2);
    const MeasurementFrame bg = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const IrgnResult result = irgn_reconstruct(bg, s.mesh, s.layout, IrgnConfig{});
    CHECK(!result.aborted);
    for (double v : result.field.values) CHECK(std::abs(v - 1.0) <= 1e-8);
    CHECK(result.field.provenance == Provenance::Irgn);
}

TEST_CASE("huge regularization pins the iterates to sigma_init") {
    const Scene s = make_scene(0.25);
    const MeasurementFrame data =
        forward(s.mesh, s.layout, rasterize(one_anomaly(), s.mesh));
    IrgnConfig config;
    config.alpha0_rel = 1e6;
    config.q = 0.999;
    const IrgnResult result = irgn_reconstruct(data, s.mesh, s.layout, config);
    for (double v : result.field.values) CHECK(std::abs(v - 1.0) <= 1e-3);
}

TEST_CASE("alpha schedule is strictly decreasing and steps verify") {
    const Scene s = make_scene(0.25);
    const MeasurementFrame data =
        forward(s.mesh, s.layout, rasterize(one_anomaly(), s.mesh));
    IrgnConfig config;
    config.max_iters = 8;
    config.tol = 0.0;  // run all iterations
    const IrgnResult result = irgn_reconstruct(data, s.mesh, s.layout, config);
    REQUIRE(result.history.size() == 8);
    for (std::size_t k = 1; k < result.history.size(); ++k)
        CHECK(result.history[k].alpha < result.history[k - 1].alpha);
    for (const auto& it : result.history) CHECK(it.normal_eq_error <= 1e-8);
}

TEST_CASE("box projection bounds every iterate") {
    const Scene s = make_scene(0.25);
    Phantom strong;
    strong.anomalies.push_back({{0.0, 0.0}, 0.4, 4.0});
    const MeasurementFrame data = forward(s.mesh, s.layout, rasterize(strong, s.mesh));
    IrgnConfig config;
    config.box_lo = 0.9;
    config.box_hi = 1.1;
    const IrgnResult result = irgn_reconstruct(data, s.mesh, s.layout, config);
    for (double v : result.field.values) {
        CHECK(v >= 0.9);
        CHECK(v <= 1.1);
    }
}

TEST_CASE("difference frames require the background, then reproduce the raw fit") {
    const Scene s = make_scene(0.25);
    const MeasurementFrame bg = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const MeasurementFrame raw =
        forward(s.mesh, s.layout, rasterize(one_anomaly(), s.mesh));
    const MeasurementFrame diff = difference_frame(raw, bg);
    CHECK_THROWS(irgn_reconstruct(diff, s.mesh, s.layout, IrgnConfig{}));

    const IrgnResult from_raw = irgn_reconstruct(raw, s.mesh, s.layout, IrgnConfig{});
    const IrgnResult from_diff =
        irgn_reconstruct(diff, s.mesh, s.layout, IrgnConfig{}, &bg);
    REQUIRE(from_raw.field.values.size() == from_diff.field.values.size());
    for (std::size_t i = 0; i < from_raw.field.values.size(); ++i)
        CHECK(from_diff.field.values[i] ==
              doctest::Approx(from_raw.field.values[i]).epsilon(1e-9));
}

TEST_CASE("reconstruction localizes a single anomaly from noisy data") {
    const Scene data_scene = make_scene(0.1);
    const Scene inv_scene = make_scene(0.2);
    const Phantom truth = one_anomaly();
    const MeasurementFrame clean =
        forward(data_scene.mesh, data_scene.layout, rasterize(truth, data_scene.mesh));
    const MeasurementFrame data_bg =
        forward(data_scene.mesh, data_scene.layout, uniform_sigma(data_scene.mesh, 1.0));
    const MeasurementFrame inv_bg =
        forward(inv_scene.mesh, inv_scene.layout, uniform_sigma(inv_scene.mesh, 1.0));

    int hits = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const MeasurementFrame noisy = add_noise(clean, 0.01, seed);
        const MeasurementFrame diff = difference_frame(noisy, data_bg);
        const IrgnResult result =
            irgn_reconstruct(diff, inv_scene.mesh, inv_scene.layout, IrgnConfig{}, &inv_bg);
        const Vec2 com = perturbation_center_of_mass(result.field.values, inv_scene.mesh);
        if (std::hypot(com.x - 0.3, com.y - 0.0) <= 0.15) ++hits;
    }
    CHECK(hits >= 2);
}

TEST_CASE("noise degradation: mean L2 error does not improve from 1 to 9 percent") {
    const Scene data_scene = make_scene(0.1);
    const Scene inv_scene = make_scene(0.2);
    const Phantom truth = one_anomaly();
    const MeasurementFrame clean =
        forward(data_scene.mesh, data_scene.layout, rasterize(truth, data_scene.mesh));
    const MeasurementFrame data_bg =
        forward(data_scene.mesh, data_scene.layout, uniform_sigma(data_scene.mesh, 1.0));
    const MeasurementFrame inv_bg =
        forward(inv_scene.mesh, inv_scene.layout, uniform_sigma(inv_scene.mesh, 1.0));

    auto mean_l2 = [&](double level) {
        double acc = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const MeasurementFrame noisy = add_noise(clean, level, 1000 + seed);
            const MeasurementFrame diff = difference_frame(noisy, data_bg);
            const IrgnResult result = irgn_reconstruct(diff, inv_scene.mesh,
                                                       inv_scene.layout, IrgnConfig{},
                                                       &inv_bg);
            double err = 0.0;
            for (int t = 0; t < inv_scene.mesh.n_triangles(); ++t) {
                const double truth_v = eval_sigma(truth, inv_scene.mesh.centroid(t));
                const double d = result.field.values[static_cast<std::size_t>(t)] - truth_v;
                err += inv_scene.mesh.element_areas[t] * d * d;
            }
            acc += std::sqrt(err);
        }
        return acc / 10.0;
    };
    CHECK(mean_l2(0.09) >= mean_l2(0.01));
}

TEST_CASE("config validation") {
    const Scene s = make_scene(0.3);
    const MeasurementFrame bg = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    IrgnConfig bad;
    bad.q = 1.5;
    CHECK_THROWS(irgn_reconstruct(bg, s.mesh, s.layout, bad));
    bad = IrgnConfig{};
    bad.box_lo = 0.0;
    CHECK_THROWS(irgn_reconstruct(bg, s.mesh, s.layout, bad));
    bad = IrgnConfig{};
    bad.alpha0_rel = -1.0;
    CHECK_THROWS(irgn_reconstruct(bg, s.mesh, s.layout, bad));
}
