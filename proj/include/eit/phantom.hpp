#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eit/mesh.hpp"

namespace eit {

struct Anomaly {
    Vec2 center;
    double radius = 0.0;
    double value = 1.0;
};

// Unit background plus up to four disjoint circular inclusions, all kept away
// from the boundary so the conductivity is 1 near the circle. Membership is
// closed-disk: a point exactly on an anomaly circle takes the anomaly value.
struct Phantom {
    std::vector<Anomaly> anomalies;
    static constexpr double background = 1.0;

    // Analytic mean of the field over the unit disk, divided by the disk area.
    double analytic_mean() const;
};

struct PointSample {
    std::vector<Vec2> points;
    std::vector<double> labels;
    std::vector<bool> anomalous_mask;
};

// Geometry/value ranges for generated phantoms. The margin keeps gamma = 1
// near the boundary; the separation keeps inclusions resolvable.
struct PhantomRanges {
    double radius_lo = 0.1;
    double radius_hi = 0.3;
    double value_lo = 0.1;
    double value_gap_lo = 0.8;   // excluded band around the background
    double value_gap_hi = 1.25;
    double value_hi = 4.0;
    double margin = 0.85;        // |center| + radius <= margin
    double separation = 0.05;    // |ci - cj| >= ri + rj + separation
};

Phantom sample_phantom(std::uint64_t seed, int n_anomalies,
                       const PhantomRanges& ranges = {});

// Throws if |point| > 1.
double eval_sigma(const Phantom& phantom, const Vec2& point);

// Per-triangle conductivity, constant on each element.
struct SigmaField {
    std::vector<double> values;
    std::uint64_t mesh_id = 0;
};

SigmaField rasterize(const Phantom& phantom, const Mesh& mesh);
SigmaField uniform_sigma(const Mesh& mesh, double value);

// n/2 points uniform over the anomaly disks (allocated per disk in proportion
// to area), n/2 uniform over the rest of the unit disk. A phantom with no
// anomalies gets all n points uniform over the disk. n must be even.
PointSample sample_points(const Phantom& phantom, int n, std::uint64_t seed);

// One phantom per line: n, then cx, cy, r, v per anomaly.
void write_phantom_csv(const Phantom& phantom, std::ostream& out);
Phantom parse_phantom_csv(const std::string& line);
void save_phantoms_csv(const std::vector<Phantom>& phantoms, const std::string& path);
std::vector<Phantom> load_phantoms_csv(const std::string& path);

}  // namespace eit
