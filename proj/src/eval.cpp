#include "eit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "eit/rng.hpp"

namespace eit {

namespace {

void check_sizes(std::size_t estimates, std::size_t reference, const char* where) {
    if (estimates != reference)
        throw std::invalid_argument(std::string(where) + ": estimate size mismatch");
}

double sample_std(const std::vector<double>& xs, double mean) {
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / (static_cast<double>(xs.size()) - 1.0));
}

// 9-stop viridis-like gradient, linear in between.
void colormap(double v, unsigned char* rgb) {
    static const double stops[9][3] = {
        {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
        {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
        {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.993, 0.906, 0.144}};
    v = std::clamp(v, 0.0, 1.0);
    const double x = v * 8.0;
    const int i = std::min(static_cast<int>(x), 7);
    const double f = x - i;
    for (int c = 0; c < 3; ++c) {
        const double val = stops[i][c] * (1.0 - f) + stops[i + 1][c] * f;
        rgb[c] = static_cast<unsigned char>(std::lround(255.0 * val));
    }
}

}  // namespace

double l2_error(const std::vector<double>& per_triangle, const Phantom& phantom,
                const Mesh& mesh) {
    check_sizes(per_triangle.size(), static_cast<std::size_t>(mesh.n_triangles()),
                "l2_error");
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const double truth = eval_sigma(phantom, mesh.centroid(t));
        const double d = per_triangle[static_cast<std::size_t>(t)] - truth;
        acc += mesh.element_areas[t] * d * d;
    }
    return std::sqrt(acc);
}

double l2_error_points(const std::vector<double>& estimates,
                       const std::vector<Vec2>& points, const Phantom& phantom) {
    check_sizes(estimates.size(), points.size(), "l2_error_points");
    if (points.empty()) throw std::invalid_argument("l2_error_points: no points");
    double acc = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = estimates[i] - eval_sigma(phantom, points[i]);
        acc += d * d;
    }
    return std::sqrt(M_PI * acc / static_cast<double>(points.size()));
}

double weighted_l2_error(const std::vector<double>& per_triangle, const Phantom& phantom,
                         const Mesh& mesh) {
    check_sizes(per_triangle.size(), static_cast<std::size_t>(mesh.n_triangles()),
                "weighted_l2_error");
    if (phantom.anomalies.empty()) return l2_error(per_triangle, phantom, mesh);

    double anom_err = 0.0, anom_area = 0.0, bg_err = 0.0, bg_area = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Vec2 c = mesh.centroid(t);
        const double truth = eval_sigma(phantom, c);
        const double d = per_triangle[static_cast<std::size_t>(t)] - truth;
        const double a = mesh.element_areas[t];
        if (truth != Phantom::background) {
            anom_err += a * d * d;
            anom_area += a;
        } else {
            bg_err += a * d * d;
            bg_area += a;
        }
    }
    if (anom_area == 0.0)
        throw std::runtime_error(
            "weighted_l2_error: no triangle centroid falls in an anomaly (mesh too coarse)");
    return std::sqrt(0.5 * anom_err / anom_area + 0.5 * bg_err / bg_area);
}

double weighted_l2_error_points(const std::vector<double>& estimates,
                                const std::vector<Vec2>& points, const Phantom& phantom) {
    check_sizes(estimates.size(), points.size(), "weighted_l2_error_points");
    if (phantom.anomalies.empty()) return l2_error_points(estimates, points, phantom);
    double anom_err = 0.0, bg_err = 0.0;
    std::size_t n_anom = 0, n_bg = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double truth = eval_sigma(phantom, points[i]);
        const double d = estimates[i] - truth;
        if (truth != Phantom::background) {
            anom_err += d * d;
            ++n_anom;
        } else {
            bg_err += d * d;
            ++n_bg;
        }
    }
    if (n_anom == 0)
        throw std::runtime_error("weighted_l2_error_points: no anomalous points");
    return std::sqrt(0.5 * anom_err / static_cast<double>(n_anom) +
                     0.5 * bg_err / static_cast<double>(std::max<std::size_t>(n_bg, 1)));
}

std::vector<NoiseStudyRow> noise_study(const NoiseStudySetup& setup,
                                       const std::vector<double>& levels, int repeats,
                                       std::uint64_t seed) {
    if (repeats < 2) throw std::invalid_argument("noise_study: repeats must be >= 2");
    if (levels.empty()) throw std::invalid_argument("noise_study: no levels");

    const SigmaField sigma = rasterize(setup.phantom, setup.data_mesh);
    const MeasurementFrame clean = forward(setup.data_mesh, setup.data_layout, sigma);
    const MeasurementFrame data_bg = forward(setup.data_mesh, setup.data_layout,
                                             uniform_sigma(setup.data_mesh, 1.0));
    const MeasurementFrame inv_bg = forward(setup.inv_mesh, setup.inv_layout,
                                            uniform_sigma(setup.inv_mesh, 1.0));

    std::vector<Vec2> centroids;
    centroids.reserve(static_cast<std::size_t>(setup.inv_mesh.n_triangles()));
    for (int t = 0; t < setup.inv_mesh.n_triangles(); ++t)
        centroids.push_back(setup.inv_mesh.centroid(t));

    std::vector<NoiseStudyRow> rows;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        std::vector<double> don_l2, don_wl2, irgn_l2, irgn_wl2;
        for (int rep = 0; rep < repeats; ++rep) {
            const std::uint64_t cell_seed = derive_seed(seed, li, static_cast<std::uint64_t>(rep));
            MeasurementFrame noisy;
            try {
                noisy = add_noise(clean, levels[li], cell_seed);
            } catch (const std::exception& e) {
                std::cerr << "noise_study: level " << levels[li] << " rep " << rep
                          << " failed: " << e.what() << "\n";
                continue;
            }
            const MeasurementFrame diff = difference_frame(noisy, data_bg);
            try {
                const ReconstructionField don =
                    reconstruct(setup.model, diff, centroids, setup.model.threshold);
                don_l2.push_back(l2_error(don.values, setup.phantom, setup.inv_mesh));
                don_wl2.push_back(weighted_l2_error(don.values, setup.phantom, setup.inv_mesh));
            } catch (const std::exception& e) {
                std::cerr << "noise_study: deeponet cell (level " << levels[li] << ", rep "
                          << rep << ") failed: " << e.what() << "\n";
            }
            try {
                const IrgnResult ir = irgn_reconstruct(diff, setup.inv_mesh,
                                                       setup.inv_layout, setup.irgn_config,
                                                       &inv_bg);
                if (ir.aborted) throw std::runtime_error(ir.abort_reason);
                irgn_l2.push_back(l2_error(ir.field.values, setup.phantom, setup.inv_mesh));
                irgn_wl2.push_back(
                    weighted_l2_error(ir.field.values, setup.phantom, setup.inv_mesh));
            } catch (const std::exception& e) {
                std::cerr << "noise_study: irgn cell (level " << levels[li] << ", rep "
                          << rep << ") failed: " << e.what() << "\n";
            }
        }
        auto emit = [&](const char* method, const char* metric,
                        const std::vector<double>& xs) {
            NoiseStudyRow row;
            row.method = method;
            row.metric = metric;
            row.noise_level = levels[li];
            row.repeats = static_cast<int>(xs.size());
            if (!xs.empty()) {
                double mean = 0.0;
                for (double x : xs) mean += x;
                mean /= static_cast<double>(xs.size());
                row.mean = mean;
                row.std_dev = xs.size() >= 2 ? sample_std(xs, mean)
                                             : std::numeric_limits<double>::quiet_NaN();
            } else {
                row.mean = row.std_dev = std::numeric_limits<double>::quiet_NaN();
            }
            rows.push_back(row);
        };
        emit("deeponet", "l2", don_l2);
        emit("deeponet", "weighted_l2", don_wl2);
        emit("irgn", "l2", irgn_l2);
        emit("irgn", "weighted_l2", irgn_wl2);
    }
    return rows;
}

void write_noise_study_csv(const std::vector<NoiseStudyRow>& rows,
                           const std::string& path, const std::string& config_json) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_noise_study_csv: cannot open " + path);
    out << "# format-version 1\n";
    if (!config_json.empty()) out << "# config " << config_json << "\n";
    out << "method,metric,noise_level,mean,std,repeats\n";
    out << std::setprecision(17);
    for (const auto& r : rows)
        out << r.method << "," << r.metric << "," << r.noise_level << "," << r.mean << ","
            << r.std_dev << "," << r.repeats << "\n";
}

std::vector<std::pair<int, Vec2>> raster_points(int size) {
    std::vector<std::pair<int, Vec2>> pts;
    for (int row = 0; row < size; ++row) {
        for (int col = 0; col < size; ++col) {
            // image row 0 at y = +1
            const double x = -1.0 + 2.0 * (col + 0.5) / size;
            const double y = 1.0 - 2.0 * (row + 0.5) / size;
            if (x * x + y * y <= 1.0) pts.push_back({row * size + col, {x, y}});
        }
    }
    return pts;
}

RasterImage render_grid(const std::vector<double>& values, int size, double range_lo,
                        double range_hi) {
    if (!(range_hi > range_lo))
        throw std::invalid_argument("render_grid: degenerate color range");
    if (values.size() != static_cast<std::size_t>(size) * static_cast<std::size_t>(size))
        throw std::invalid_argument("render_grid: value count must be size^2");
    RasterImage img;
    img.size = size;
    img.rgb.assign(static_cast<std::size_t>(3) * size * size, 0);
    for (const auto& [idx, p] : raster_points(size)) {
        static_cast<void>(p);
        const double v =
            (values[static_cast<std::size_t>(idx)] - range_lo) / (range_hi - range_lo);
        colormap(v, &img.rgb[3 * static_cast<std::size_t>(idx)]);
    }
    return img;
}

RasterImage render_field(const Mesh& mesh, const std::vector<double>& values,
                         int size, double range_lo, double range_hi) {
    if (!(range_hi > range_lo))
        throw std::invalid_argument("render_field: degenerate color range");
    check_sizes(values.size(), static_cast<std::size_t>(mesh.n_triangles()), "render_field");

    // rasterize triangle by triangle over each one's pixel bounding box
    std::vector<double> grid(static_cast<std::size_t>(size) * size,
                             std::numeric_limits<double>::quiet_NaN());
    auto to_col = [size](double x) { return (x + 1.0) * 0.5 * size - 0.5; };
    auto to_row = [size](double y) { return (1.0 - y) * 0.5 * size - 0.5; };
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2 a = mesh.vertices[tri[0]];
        const Vec2 b = mesh.vertices[tri[1]];
        const Vec2 c = mesh.vertices[tri[2]];
        const int col_lo = std::max(0, static_cast<int>(std::floor(
                                           to_col(std::min({a.x, b.x, c.x})))));
        const int col_hi = std::min(size - 1, static_cast<int>(std::ceil(
                                                  to_col(std::max({a.x, b.x, c.x})))));
        const int row_lo = std::max(0, static_cast<int>(std::floor(
                                           to_row(std::max({a.y, b.y, c.y})))));
        const int row_hi = std::min(size - 1, static_cast<int>(std::ceil(
                                                  to_row(std::min({a.y, b.y, c.y})))));
        for (int row = row_lo; row <= row_hi; ++row) {
            const double y = 1.0 - 2.0 * (row + 0.5) / size;
            for (int col = col_lo; col <= col_hi; ++col) {
                const double x = -1.0 + 2.0 * (col + 0.5) / size;
                const double s0 = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
                const double s1 = (c.x - b.x) * (y - b.y) - (c.y - b.y) * (x - b.x);
                const double s2 = (a.x - c.x) * (y - c.y) - (a.y - c.y) * (x - c.x);
                const double tol = -1e-12;
                if (s0 >= tol && s1 >= tol && s2 >= tol)
                    grid[static_cast<std::size_t>(row) * size + col] =
                        values[static_cast<std::size_t>(t)];
            }
        }
    }

    RasterImage img;
    img.size = size;
    img.rgb.assign(static_cast<std::size_t>(3) * size * size, 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::isnan(grid[i])) continue;
        const double v = (grid[i] - range_lo) / (range_hi - range_lo);
        colormap(v, &img.rgb[3 * i]);
    }
    return img;
}

void write_ppm(const RasterImage& image, const std::string& path,
               const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n";
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << "\n";
    out << image.size << " " << image.size << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()),
              static_cast<std::streamsize>(image.rgb.size()));
}

std::vector<Vec2> cut_points(double angle, const Vec2& offset, int n_samples) {
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(n_samples));
    const double dx = std::cos(angle), dy = std::sin(angle);
    for (int i = 0; i < n_samples; ++i) {
        const double t = -1.0 + 2.0 * i / (n_samples - 1);
        pts.push_back({offset.x + t * dx, offset.y + t * dy});
    }
    return pts;
}

std::vector<double> cut_values_mesh(const Mesh& mesh, const std::vector<double>& values,
                                    const std::vector<Vec2>& pts) {
    check_sizes(values.size(), static_cast<std::size_t>(mesh.n_triangles()),
                "cut_values_mesh");
    std::vector<double> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        const int t = (p.x * p.x + p.y * p.y <= 1.0) ? mesh.find_triangle(p) : -1;
        out.push_back(t >= 0 ? values[static_cast<std::size_t>(t)]
                             : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

std::vector<double> cut_values_phantom(const Phantom& phantom,
                                       const std::vector<Vec2>& pts) {
    std::vector<double> out;
    out.reserve(pts.size());
    for (const auto& p : pts)
        out.push_back(p.x * p.x + p.y * p.y <= 1.0
                          ? eval_sigma(phantom, p)
                          : std::numeric_limits<double>::quiet_NaN());
    return out;
}

}  // namespace eit
