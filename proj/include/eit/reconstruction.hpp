#pragma once

#include <optional>
#include <string>
#include <vector>

namespace eit {

enum class Provenance { DeepONet, Irgn };

inline const char* provenance_name(Provenance p) {
    return p == Provenance::DeepONet ? "deeponet" : "irgn";
}

struct ErrorPair {
    double l2 = 0.0;
    double weighted_l2 = 0.0;
};

// Conductivity estimate, either one value per mesh triangle or one value per
// query point, depending on which method produced it.
struct ReconstructionField {
    std::vector<double> values;
    Provenance provenance = Provenance::DeepONet;
    std::optional<ErrorPair> metrics;
};

}  // namespace eit
