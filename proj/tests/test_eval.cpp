#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eit/eval.hpp"

using namespace eit;

namespace {

Phantom centered_anomaly(double v = 2.0, double r = 0.2) {
    Phantom p;
    p.anomalies.push_back({{0.0, 0.0}, r, v});
    return p;
}

std::vector<double> truth_values(const Phantom& p, const Mesh& mesh) {
    std::vector<double> v(static_cast<std::size_t>(mesh.n_triangles()));
    for (int t = 0; t < mesh.n_triangles(); ++t)
        v[static_cast<std::size_t>(t)] = eval_sigma(p, mesh.centroid(t));
    return v;
}

}  // namespace

TEST_CASE("l2 error: exact match, constant offset, closed-form anomaly") {
    const Mesh mesh = build_disk_mesh(0.04);
    const Phantom p = centered_anomaly();

    CHECK(l2_error(truth_values(p, mesh), p, mesh) == 0.0);

    Phantom background;
    const double c = 0.37;
    std::vector<double> offset(static_cast<std::size_t>(mesh.n_triangles()), 1.0 + c);
    CHECK(l2_error(offset, background, mesh) ==
          doctest::Approx(c * std::sqrt(M_PI)).epsilon(0.01));

    // constant-1 estimate vs a v=2, r=0.2 anomaly: sqrt(pi r^2) ~ 0.3545
    std::vector<double> ones(static_cast<std::size_t>(mesh.n_triangles()), 1.0);
    const double expect = std::sqrt(M_PI * 0.2 * 0.2);
    CHECK(l2_error(ones, p, mesh) == doctest::Approx(expect).epsilon(0.05));

    std::vector<double> wrong_size(3, 1.0);
    CHECK_THROWS(l2_error(wrong_size, p, mesh));
}

TEST_CASE("l2 error grows linearly in the constant offset") {
    const Mesh mesh = build_disk_mesh(0.1);
    Phantom background;
    auto err_at = [&](double c) {
        std::vector<double> est(static_cast<std::size_t>(mesh.n_triangles()), 1.0 + c);
        return l2_error(est, background, mesh);
    };
    const double base = err_at(0.1) / 0.1;
    for (const double c : {0.2, 0.5, 1.0, 2.0})
        CHECK(err_at(c) / c == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("weighted l2: zero, closed form, symmetry, fallback, guard") {
    const Mesh mesh = build_disk_mesh(0.04);
    const Phantom p = centered_anomaly();

    CHECK(weighted_l2_error(truth_values(p, mesh), p, mesh) == 0.0);

    // constant-1 estimate: anomalous class error 1, background 0 -> sqrt(0.5)
    std::vector<double> ones(static_cast<std::size_t>(mesh.n_triangles()), 1.0);
    CHECK(weighted_l2_error(ones, p, mesh) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(0.05));

    // symmetric in (estimate, truth): estimate == phantom values of another phantom
    const Phantom q = centered_anomaly(3.0, 0.2);
    const double a = weighted_l2_error(truth_values(q, mesh), p, mesh);
    const double b = weighted_l2_error(truth_values(p, mesh), q, mesh);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));

    // no anomalies: falls back to plain l2
    Phantom background;
    std::vector<double> est(static_cast<std::size_t>(mesh.n_triangles()), 1.5);
    CHECK(weighted_l2_error(est, background, mesh) ==
          doctest::Approx(l2_error(est, background, mesh)).epsilon(1e-12));

    // anomaly smaller than the mesh resolution is an explicit error
    const Mesh coarse = build_disk_mesh(0.4);
    Phantom tiny;
    tiny.anomalies.push_back({{0.123, 0.456}, 0.004, 2.0});
    std::vector<double> coarse_est(static_cast<std::size_t>(coarse.n_triangles()), 1.0);
    CHECK_THROWS(weighted_l2_error(coarse_est, tiny, coarse));
}

TEST_CASE("point-based metrics agree with the closed forms") {
    const Phantom p = centered_anomaly();
    std::vector<Vec2> points;
    std::vector<double> ones;
    // deterministic grid inside the disk
    for (double x = -0.95; x <= 0.95; x += 0.02)
        for (double y = -0.95; y <= 0.95; y += 0.02)
            if (x * x + y * y <= 1.0) {
                points.push_back({x, y});
                ones.push_back(1.0);
            }
    CHECK(l2_error_points(ones, points, p) ==
          doctest::Approx(std::sqrt(M_PI * 0.04)).epsilon(0.07));
    CHECK(weighted_l2_error_points(ones, points, p) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(0.07));
}

TEST_CASE("noise study: shape, zero-noise degeneracy, determinism") {
    const Mesh data_mesh = build_disk_mesh(0.2);
    const ElectrodeLayout data_layout = place_electrodes(data_mesh, 16, 0.5, 0.1);
    const Mesh inv_mesh = build_disk_mesh(0.25);
    const ElectrodeLayout inv_layout = place_electrodes(inv_mesh, 16, 0.5, 0.1);
    const DeepONetModel model = make_deeponet(42);
    const Phantom phantom = centered_anomaly();

    IrgnConfig irgn_config;
    irgn_config.max_iters = 4;
    const NoiseStudySetup setup{phantom, data_mesh, data_layout,
                                inv_mesh, inv_layout, model, irgn_config};

    const auto rows = noise_study(setup, {0.0, 0.01}, 2, 99);
    REQUIRE(rows.size() == 8);  // methods x metrics x levels
    for (const auto& row : rows) {
        CHECK(row.repeats == 2);
        CHECK(std::isfinite(row.mean));
        CHECK(row.std_dev >= 0.0);
    }
    // zero noise: both methods are deterministic, std over repeats is 0
    for (const auto& row : rows)
        if (row.noise_level == 0.0) CHECK(row.std_dev == 0.0);

    const auto rows2 = noise_study(setup, {0.0, 0.01}, 2, 99);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].mean == rows2[i].mean);
        CHECK(rows[i].std_dev == rows2[i].std_dev);
    }

    CHECK_THROWS(noise_study(setup, {0.01}, 1, 1));
}

TEST_CASE("render: constant disk, degenerate range, grid/mesh variants") {
    const Mesh mesh = build_disk_mesh(0.2);
    std::vector<double> values(static_cast<std::size_t>(mesh.n_triangles()), 1.0);
    const RasterImage img = render_field(mesh, values, 64, 0.0, 2.0);
    REQUIRE(img.size == 64);

    // all interior pixels share one color; corners stay black
    const auto inside = raster_points(64);
    const unsigned char r0 = img.rgb[3 * static_cast<std::size_t>(inside.front().first)];
    int mismatches = 0;
    for (const auto& [idx, p] : inside) {
        static_cast<void>(p);
        if (img.rgb[3 * static_cast<std::size_t>(idx)] != r0) ++mismatches;
    }
    CHECK(mismatches == 0);
    CHECK(img.rgb[0] == 0);
    CHECK(img.rgb[1] == 0);
    CHECK(img.rgb[2] == 0);

    CHECK_THROWS(render_field(mesh, values, 64, 1.0, 1.0));
    CHECK_THROWS(render_grid({1.0}, 2, 0.0, 1.0));

    const std::string path = "render_test.ppm";
    write_ppm(img, path, "unit test");
    CHECK(std::filesystem::file_size(path) > 64 * 64 * 3);
    std::filesystem::remove(path);
}

TEST_CASE("cut profiles: flat background and top-hat through an anomaly") {
    const Mesh mesh = build_disk_mesh(0.05);
    Phantom background;
    const auto pts = cut_points(0.0, {0.0, 0.0}, 201);
    const auto flat = cut_values_mesh(mesh, truth_values(background, mesh), pts);
    for (double v : flat) CHECK(v == doctest::Approx(1.0));

    const Phantom p = centered_anomaly();  // v=2, r=0.2
    const auto truth_cut = cut_values_phantom(p, pts);
    const auto mesh_cut = cut_values_mesh(mesh, truth_values(p, mesh), pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double t = -1.0 + 2.0 * static_cast<double>(i) / 200.0;
        if (std::abs(t) < 0.17) {
            CHECK(truth_cut[i] == 2.0);
            CHECK(mesh_cut[i] == 2.0);
        } else if (std::abs(t) > 0.23) {
            CHECK(truth_cut[i] == 1.0);
            CHECK(mesh_cut[i] == 1.0);
        }
    }
}

TEST_CASE("noise study csv format") {
    std::vector<NoiseStudyRow> rows;
    rows.push_back({"deeponet", "l2", 0.01, 1.5, 0.1, 10});
    const std::string path = "study_test.csv";
    write_noise_study_csv(rows, path, "{\"k\":1}");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# format-version 1");
    std::getline(in, line);
    CHECK(line.rfind("# config", 0) == 0);
    std::getline(in, line);
    CHECK(line == "method,metric,noise_level,mean,std,repeats");
    std::getline(in, line);
    CHECK(line.rfind("deeponet,l2,", 0) == 0);
    std::filesystem::remove(path);
}
