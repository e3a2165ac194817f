#include "eit/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "eit/rng.hpp"

namespace eit {

namespace {

bool disjoint_from(const Anomaly& cand, const std::vector<Anomaly>& placed,
                   double separation) {
    for (const auto& a : placed) {
        const double d = std::hypot(cand.center.x - a.center.x,
                                    cand.center.y - a.center.y);
        if (d < cand.radius + a.radius + separation) return false;
    }
    return true;
}

Vec2 rejection_point_in_disk(Rng& rng, const Vec2& center, double radius) {
    for (;;) {
        const double x = rng.uniform(-radius, radius);
        const double y = rng.uniform(-radius, radius);
        if (x * x + y * y <= radius * radius)
            return {center.x + x, center.y + y};
    }
}

int covering_anomaly(const Phantom& phantom, const Vec2& p) {
    for (int i = 0; i < static_cast<int>(phantom.anomalies.size()); ++i) {
        const auto& a = phantom.anomalies[i];
        const double dx = p.x - a.center.x, dy = p.y - a.center.y;
        if (dx * dx + dy * dy <= a.radius * a.radius) return i;
    }
    return -1;
}

}  // namespace

double Phantom::analytic_mean() const {
    double integral = M_PI * background;
    for (const auto& a : anomalies)
        integral += M_PI * a.radius * a.radius * (a.value - background);
    return integral / M_PI;
}

Phantom sample_phantom(std::uint64_t seed, int n_anomalies, const PhantomRanges& rg) {
    if (n_anomalies < 1 || n_anomalies > 4)
        throw std::invalid_argument("sample_phantom: n_anomalies must be in [1, 4]");

    Rng rng(seed);
    Phantom phantom;
    const double band_lo = rg.value_gap_lo - rg.value_lo;          // low-value band length
    const double band_hi = rg.value_hi - rg.value_gap_hi;          // high-value band length
    int rejected = 0;
    while (static_cast<int>(phantom.anomalies.size()) < n_anomalies) {
        Anomaly a;
        a.radius = rng.uniform(rg.radius_lo, rg.radius_hi);
        a.center = rejection_point_in_disk(rng, {0.0, 0.0}, rg.margin - a.radius);
        const double u = rng.uniform(0.0, band_lo + band_hi);
        a.value = (u < band_lo) ? rg.value_lo + u : rg.value_gap_hi + (u - band_lo);
        if (disjoint_from(a, phantom.anomalies, rg.separation)) {
            phantom.anomalies.push_back(a);
        } else if (++rejected > 10000) {
            throw std::runtime_error("sample_phantom: placement failed after 10000 rejections");
        }
    }
    return phantom;
}

double eval_sigma(const Phantom& phantom, const Vec2& point) {
    if (point.x * point.x + point.y * point.y > 1.0 + 1e-12)
        throw std::invalid_argument("eval_sigma: point outside the unit disk");
    const int i = covering_anomaly(phantom, point);
    return i >= 0 ? phantom.anomalies[i].value : Phantom::background;
}

SigmaField rasterize(const Phantom& phantom, const Mesh& mesh) {
    SigmaField field;
    field.mesh_id = mesh.fingerprint();
    field.values.resize(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Vec2 c = mesh.centroid(t);
        const int i = covering_anomaly(phantom, c);
        field.values[t] = i >= 0 ? phantom.anomalies[i].value : Phantom::background;
    }
    return field;
}

SigmaField uniform_sigma(const Mesh& mesh, double value) {
    SigmaField field;
    field.mesh_id = mesh.fingerprint();
    field.values.assign(mesh.n_triangles(), value);
    return field;
}

PointSample sample_points(const Phantom& phantom, int n, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("sample_points: n must be even and >= 2");

    Rng rng(seed);
    PointSample sample;
    sample.points.reserve(n);
    sample.labels.reserve(n);
    sample.anomalous_mask.reserve(n);

    const int n_anom = static_cast<int>(phantom.anomalies.size());
    if (n_anom == 0) {
        for (int i = 0; i < n; ++i) {
            const Vec2 p = rejection_point_in_disk(rng, {0.0, 0.0}, 1.0);
            sample.points.push_back(p);
            sample.labels.push_back(Phantom::background);
            sample.anomalous_mask.push_back(false);
        }
        return sample;
    }

    // Split n/2 anomalous points across disks in proportion to area,
    // distributing the remainder by largest fractional share.
    const int half = n / 2;
    double total_area = 0.0;
    for (const auto& a : phantom.anomalies) total_area += a.radius * a.radius;
    std::vector<int> counts(n_anom, 0);
    std::vector<std::pair<double, int>> fracs;
    int assigned = 0;
    for (int i = 0; i < n_anom; ++i) {
        const double share = half * phantom.anomalies[i].radius *
                             phantom.anomalies[i].radius / total_area;
        counts[i] = static_cast<int>(std::floor(share));
        assigned += counts[i];
        fracs.push_back({share - counts[i], i});
    }
    std::sort(fracs.begin(), fracs.end(), [](const auto& l, const auto& r) {
        return l.first != r.first ? l.first > r.first : l.second < r.second;
    });
    for (int k = 0; assigned < half; ++k, ++assigned) counts[fracs[k % n_anom].second]++;

    for (int i = 0; i < n_anom; ++i) {
        const auto& a = phantom.anomalies[i];
        for (int k = 0; k < counts[i]; ++k) {
            const Vec2 p = rejection_point_in_disk(rng, a.center, a.radius);
            sample.points.push_back(p);
            sample.labels.push_back(a.value);
            sample.anomalous_mask.push_back(true);
        }
    }
    int produced = 0;
    while (produced < half) {
        const Vec2 p = rejection_point_in_disk(rng, {0.0, 0.0}, 1.0);
        if (covering_anomaly(phantom, p) >= 0) continue;
        sample.points.push_back(p);
        sample.labels.push_back(Phantom::background);
        sample.anomalous_mask.push_back(false);
        ++produced;
    }
    return sample;
}

void write_phantom_csv(const Phantom& phantom, std::ostream& out) {
    out << phantom.anomalies.size();
    out << std::setprecision(17);
    for (const auto& a : phantom.anomalies)
        out << "," << a.center.x << "," << a.center.y << "," << a.radius << ","
            << a.value;
    out << "\n";
}

Phantom parse_phantom_csv(const std::string& line) {
    std::istringstream in(line);
    auto next_field = [&in]() {
        std::string tok;
        if (!std::getline(in, tok, ',')) throw std::runtime_error("phantom csv: truncated line");
        return std::stod(tok);
    };
    Phantom phantom;
    const int n = static_cast<int>(next_field());
    for (int i = 0; i < n; ++i) {
        Anomaly a;
        a.center.x = next_field();
        a.center.y = next_field();
        a.radius = next_field();
        a.value = next_field();
        phantom.anomalies.push_back(a);
    }
    return phantom;
}

void save_phantoms_csv(const std::vector<Phantom>& phantoms, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_phantoms_csv: cannot open " + path);
    for (const auto& p : phantoms) write_phantom_csv(p, out);
}

std::vector<Phantom> load_phantoms_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_phantoms_csv: cannot open " + path);
    std::vector<Phantom> phantoms;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) phantoms.push_back(parse_phantom_csv(line));
    }
    return phantoms;
}

}  // namespace eit
