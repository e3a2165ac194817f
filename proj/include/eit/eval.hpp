#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eit/deeponet.hpp"
#include "eit/fem.hpp"
#include "eit/irgn.hpp"
#include "eit/mesh.hpp"
#include "eit/phantom.hpp"
#include "eit/reconstruction.hpp"

namespace eit {

// sqrt( sum_T area_T (est_T - sigma_T)^2 ) with the ground truth evaluated at
// triangle centroids.
double l2_error(const std::vector<double>& per_triangle, const Phantom& phantom,
                const Mesh& mesh);

// Area-consistent point version: RMS over the points times sqrt(pi).
double l2_error_points(const std::vector<double>& estimates,
                       const std::vector<Vec2>& points, const Phantom& phantom);

// sqrt( 0.5 * mean_anomalous (est - sigma)^2 + 0.5 * mean_background (...) ),
// class membership by centroid against the ground-truth phantom, means
// area-weighted within each class. Falls back to l2_error for phantoms with
// no anomalies; an anomalous class that catches no centroid is an error.
double weighted_l2_error(const std::vector<double>& per_triangle, const Phantom& phantom,
                         const Mesh& mesh);

double weighted_l2_error_points(const std::vector<double>& estimates,
                                const std::vector<Vec2>& points, const Phantom& phantom);

struct NoiseStudyRow {
    std::string method;  // deeponet | irgn
    std::string metric;  // l2 | weighted_l2
    double noise_level = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;
    int repeats = 0;
};

struct NoiseStudySetup {
    const Phantom& phantom;
    const Mesh& data_mesh;              // frames are generated here
    const ElectrodeLayout& data_layout;
    const Mesh& inv_mesh;               // both methods are evaluated here
    const ElectrodeLayout& inv_layout;
    const DeepONetModel& model;
    IrgnConfig irgn_config;
};

// For each level and repeat: fresh noise on the raw data-mesh frame (seed
// derived from the master seed), both reconstructions on the inversion mesh,
// both metrics. Failed cells are dropped from their row's aggregate and the
// row's repeat count reflects it.
std::vector<NoiseStudyRow> noise_study(const NoiseStudySetup& setup,
                                       const std::vector<double>& levels, int repeats,
                                       std::uint64_t seed);

void write_noise_study_csv(const std::vector<NoiseStudyRow>& rows,
                           const std::string& path, const std::string& config_json);

// Raster of a field over [-1,1]^2; pixels outside the disk are black.
struct RasterImage {
    int size = 0;
    std::vector<unsigned char> rgb;  // 3 * size * size
};

// Per-triangle field on a mesh.
RasterImage render_field(const Mesh& mesh, const std::vector<double>& values,
                         int size, double range_lo, double range_hi);
// Pointwise field (e.g. network predictions) given per-pixel values in row
// order for the same grid; entries for pixels outside the disk are ignored.
RasterImage render_grid(const std::vector<double>& values, int size, double range_lo,
                        double range_hi);

// Pixel-center grid points of render_grid's raster that lie inside the disk,
// with their row-order pixel index.
std::vector<std::pair<int, Vec2>> raster_points(int size);

void write_ppm(const RasterImage& image, const std::string& path,
               const std::string& comment);

// Chord sample locations p(t) = offset + t * (cos a, sin a), t in [-1, 1].
std::vector<Vec2> cut_points(double angle, const Vec2& offset, int n_samples);
std::vector<double> cut_values_mesh(const Mesh& mesh, const std::vector<double>& values,
                                    const std::vector<Vec2>& pts);
std::vector<double> cut_values_phantom(const Phantom& phantom,
                                       const std::vector<Vec2>& pts);

}  // namespace eit
