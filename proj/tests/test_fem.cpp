#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eit/fem.hpp"
#include "eit/rng.hpp"

using namespace eit;

namespace {

struct Setup {
    Mesh mesh;
    ElectrodeLayout layout;
};

Setup make_setup(double h, int M = 16) {
    Setup s;
    s.mesh = build_disk_mesh(h);
    s.layout = place_electrodes(s.mesh, M, 0.5, 0.1);
    return s;
}

}  // namespace

TEST_CASE("adjacent protocol shape and wraparound") {
    const auto patterns = adjacent_protocol(16);
    REQUIRE(patterns.size() == 16);
    for (const auto& p : patterns) {
        int nonzeros = 0;
        for (int m = 0; m < 16; ++m)
            if (p.injections[m] != 0.0) ++nonzeros;
        CHECK(nonzeros == 2);
        CHECK(p.injections.sum() == 0.0);
    }
    CHECK(patterns[15].injections[15] == 1.0);
    CHECK(patterns[15].injections[0] == -1.0);

    CHECK(adjacent_protocol(4).size() == 4);
    CHECK_THROWS(adjacent_protocol(3));
}

TEST_CASE("assembly guards and factorization reuse") {
    const Setup s = make_setup(0.2);
    SigmaField sigma = uniform_sigma(s.mesh, 1.0);
    const CemSystem system = assemble_cem(s.mesh, s.layout, sigma);

    // one factorization serves the whole protocol
    const auto voltages = solve_protocol(system);
    CHECK(voltages.size() == 16);

    SigmaField bad = sigma;
    bad.values[3] = 0.0;
    CHECK_THROWS(assemble_cem(s.mesh, s.layout, bad));
    bad.values[3] = -1.0;
    CHECK_THROWS(assemble_cem(s.mesh, s.layout, bad));

    // mismatched mesh is rejected
    const Mesh other = build_disk_mesh(0.5);
    CHECK_THROWS(assemble_cem(other, s.layout, sigma));
}

TEST_CASE("solve: zero pattern, sign convention, linearity, ground condition") {
    const Setup s = make_setup(0.2);
    const CemSystem system = assemble_cem(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));

    CurrentPattern zero;
    zero.injections = Eigen::VectorXd::Zero(16);
    const CemSolution z = system.solve(zero);
    CHECK(z.u.norm() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(z.U.norm() == doctest::Approx(0.0).epsilon(1e-14));

    CurrentPattern p01;
    p01.injections = Eigen::VectorXd::Zero(16);
    p01.injections[0] = 1.0;
    p01.injections[1] = -1.0;
    const CemSolution sol = system.solve(p01);
    CHECK(sol.U[0] > sol.U[1]);  // current enters electrode 0
    CHECK(std::abs(sol.U.sum()) <= 1e-10);

    CurrentPattern doubled;
    doubled.injections = 2.0 * p01.injections;
    const CemSolution sol2 = system.solve(doubled);
    CHECK((sol2.U - 2.0 * sol.U).cwiseAbs().maxCoeff() <=
          1e-12 * sol.U.cwiseAbs().maxCoeff());

    CurrentPattern non_kirchhoff;
    non_kirchhoff.injections = Eigen::VectorXd::Zero(16);
    non_kirchhoff.injections[0] = 1.0;
    CHECK_THROWS(system.solve(non_kirchhoff));
}

TEST_CASE("measure emits 208 values and 13 per injection") {
    const Setup s = make_setup(0.2);
    const CemSystem system = assemble_cem(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const MeasurementFrame frame = measure(solve_protocol(system), 16);
    CHECK(frame.values.size() == 208);
    CHECK(frame.noise_level == 0.0);
    CHECK(!frame.is_difference);

    std::vector<Eigen::VectorXd> wrong(15, Eigen::VectorXd::Zero(16));
    CHECK_THROWS(measure(wrong, 16));
}

TEST_CASE("homogeneous disk: all 16 injection blocks identical") {
    const Setup s = make_setup(0.12);
    const MeasurementFrame frame = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const double scale = frame.values.cwiseAbs().maxCoeff();
    for (int j = 1; j < 16; ++j)
        for (int t = 0; t < 13; ++t)
            CHECK(std::abs(frame.values[j * 13 + t] - frame.values[t]) <= 1e-8 * scale);
}

TEST_CASE("background difference of itself is zero and flagged") {
    const Setup s = make_setup(0.25);
    const MeasurementFrame bg = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const MeasurementFrame diff = difference_frame(bg, bg);
    CHECK(diff.is_difference);
    CHECK(diff.values.norm() == 0.0);
}

TEST_CASE("conductivity/impedance scaling: forward(c g, z/c) = forward(g, z)/c") {
    const Setup s = make_setup(0.16);
    Phantom p;
    p.anomalies.push_back({{0.3, 0.1}, 0.2, 2.0});
    const SigmaField sigma = rasterize(p, s.mesh);
    const MeasurementFrame base = forward(s.mesh, s.layout, sigma);
    for (const double c : {0.5, 2.0, 10.0}) {
        SigmaField scaled = sigma;
        for (double& v : scaled.values) v *= c;
        ElectrodeLayout lay = s.layout;
        lay.z = s.layout.z / c;
        const MeasurementFrame f = forward(s.mesh, lay, scaled);
        const double rel = (f.values - base.values / c).norm() / (base.values / c).norm();
        CHECK(rel <= 1e-10);
    }
}

TEST_CASE("conductive inclusion produces a nonzero difference frame") {
    const Setup s = make_setup(0.16);
    Phantom p;
    p.anomalies.push_back({{0.0, 0.3}, 0.25, 3.0});
    const MeasurementFrame f = forward(s.mesh, s.layout, rasterize(p, s.mesh));
    const MeasurementFrame bg = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    CHECK(difference_frame(f, bg).values.norm() > 1e-6);
}

TEST_CASE("frame distance shrinks under mesh refinement") {
    Phantom p;
    p.anomalies.push_back({{0.3, 0.0}, 0.2, 2.0});
    auto frame_at = [&](double h) {
        const Setup s = make_setup(h);
        return forward(s.mesh, s.layout, rasterize(p, s.mesh));
    };
    const MeasurementFrame f1 = frame_at(0.16);
    const MeasurementFrame f2 = frame_at(0.08);
    const MeasurementFrame f3 = frame_at(0.04);
    const double d12 = (f1.values - f2.values).norm();
    const double d23 = (f2.values - f3.values).norm();
    CHECK(d23 < d12);
}

TEST_CASE("reciprocity holds on a random phantom") {
    const Setup s = make_setup(0.12);
    const Phantom p = sample_phantom(31415, 3);
    const CemSystem system = assemble_cem(s.mesh, s.layout, rasterize(p, s.mesh));
    const auto voltages = solve_protocol(system);
    const auto patterns = adjacent_protocol(16);
    double scale = 0.0;
    for (const auto& U : voltages) scale = std::max(scale, U.cwiseAbs().maxCoeff());
    for (int j = 0; j < 16; ++j)
        for (int k = 0; k < 16; ++k) {
            const double a = patterns[k].injections.dot(voltages[j]);
            const double b = patterns[j].injections.dot(voltages[k]);
            CHECK(std::abs(a - b) <= 1e-8 * scale);
        }
}

TEST_CASE("raising conductivity shrinks every injecting-pair gap") {
    const Setup s = make_setup(0.16);
    const auto v1 = solve_protocol(assemble_cem(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0)));
    const auto v15 =
        solve_protocol(assemble_cem(s.mesh, s.layout, uniform_sigma(s.mesh, 1.5)));
    for (int j = 0; j < 16; ++j) {
        const double gap1 = v1[j][j] - v1[j][(j + 1) % 16];
        const double gap15 = v15[j][j] - v15[j][(j + 1) % 16];
        CHECK(gap1 > 0.0);
        CHECK(std::abs(gap15) < std::abs(gap1));
    }
}

TEST_CASE("jacobian matches central finite differences") {
    const Setup s = make_setup(0.3);
    const Phantom p = sample_phantom(99, 2);
    const SigmaField sigma = rasterize(p, s.mesh);
    const Eigen::MatrixXd J = jacobian(s.mesh, s.layout, sigma);
    REQUIRE(J.rows() == 208);
    REQUIRE(J.cols() == s.mesh.n_triangles());

    Rng rng(4242);
    const double step = 1e-5;
    int checked = 0;
    while (checked < 20) {
        const int T = static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(s.mesh.n_triangles())));
        const int r = static_cast<int>(rng.uniform_index(208));
        SigmaField plus = sigma;
        SigmaField minus = sigma;
        plus.values[static_cast<std::size_t>(T)] += step;
        minus.values[static_cast<std::size_t>(T)] -= step;
        const double fd = (forward(s.mesh, s.layout, plus).values[r] -
                           forward(s.mesh, s.layout, minus).values[r]) /
                          (2.0 * step);
        const double an = J(r, T);
        if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
        CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(fd), std::abs(an)));
        ++checked;
    }
}

TEST_CASE("homogeneous jacobian is equivariant under electrode rotation") {
    const Setup s = make_setup(0.3);
    const Eigen::MatrixXd J = jacobian(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const double c = std::cos(2.0 * M_PI / 16.0), sn = std::sin(2.0 * M_PI / 16.0);
    const double scale = J.cwiseAbs().maxCoeff();
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int T = static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(s.mesh.n_triangles())));
        const Vec2 cen = s.mesh.centroid(T);
        const Vec2 rotated{c * cen.x - sn * cen.y, sn * cen.x + c * cen.y};
        const int T2 = s.mesh.find_triangle(rotated);
        REQUIRE(T2 >= 0);
        const int j = static_cast<int>(rng.uniform_index(16));
        const int t = static_cast<int>(rng.uniform_index(13));
        const int r = j * 13 + t;
        const int r2 = ((j + 1) % 16) * 13 + t;
        CHECK(std::abs(J(r, T) - J(r2, T2)) <= 1e-8 * scale);
    }
}

TEST_CASE("zero perturbation direction gives zero first-order change") {
    const Setup s = make_setup(0.3);
    const Eigen::MatrixXd J = jacobian(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(s.mesh.n_triangles());
    CHECK((J * zero).norm() == 0.0);
}

TEST_CASE("add_noise basics") {
    const Setup s = make_setup(0.25);
    const MeasurementFrame clean = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));

    const MeasurementFrame same = add_noise(clean, 0.0, 11);
    CHECK((same.values - clean.values).norm() == 0.0);

    const MeasurementFrame n1 = add_noise(clean, 0.01, 11);
    const MeasurementFrame n2 = add_noise(clean, 0.01, 11);
    CHECK((n1.values - n2.values).norm() == 0.0);
    CHECK(n1.noise_level == 0.01);

    CHECK_THROWS(add_noise(n1, 0.01, 12));  // levels do not compose
    CHECK_THROWS(add_noise(clean, -0.1, 1));
}

TEST_CASE("noise scale matches the clean frame's sample std (monte carlo)") {
    const Setup s = make_setup(0.25);
    const MeasurementFrame clean = forward(s.mesh, s.layout, uniform_sigma(s.mesh, 1.0));
    const double mean = clean.values.mean();
    const double s_clean = std::sqrt((clean.values.array() - mean).square().sum() /
                                     (clean.values.size() - 1));
    double acc = 0.0;
    std::int64_t count = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const MeasurementFrame noisy = add_noise(clean, 0.01, seed);
        acc += (noisy.values - clean.values).squaredNorm();
        count += clean.values.size();
    }
    const double emp_std = std::sqrt(acc / static_cast<double>(count - 1));
    CHECK(std::abs(emp_std - 0.01 * s_clean) <= 0.03 * 0.01 * s_clean);
}
