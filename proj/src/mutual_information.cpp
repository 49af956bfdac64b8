#include "re3val/mutual_information.hpp"

#include <algorithm>
#include <cmath>

#include "re3val/error.hpp"

namespace re3val {

JointDistribution::JointDistribution(std::vector<std::vector<double>> p, double tolerance) : p_(std::move(p)) {
    if (p_.empty() || p_.front().empty()) throw ValidationError("joint distribution is empty");
    double total = 0.0;
    for (const auto& row : p_) {
        if (row.size() != p_.front().size()) throw ValidationError("joint distribution rows differ in length");
        for (double v : row) {
            if (!std::isfinite(v) || v < 0.0) throw ValidationError("joint distribution has a negative or non-finite entry");
            total += v;
        }
    }
    if (std::abs(total - 1.0) > tolerance)
        throw ValidationError("joint distribution is not normalized (sum = " + std::to_string(total) + ")");
}

JointDistribution JointDistribution::from_counts(const std::vector<std::vector<double>>& counts) {
    double total = 0.0;
    for (const auto& row : counts)
        for (double v : row) total += v;
    if (!(total > 0.0)) throw ValidationError("count table has no mass");
    auto p = counts;
    for (auto& row : p)
        for (double& v : row) v /= total;
    return JointDistribution(std::move(p), 1e-9);
}

std::vector<double> JointDistribution::marginal_x() const {
    std::vector<double> m(rows(), 0.0);
    for (std::size_t x = 0; x < rows(); ++x)
        for (double v : p_[x]) m[x] += v;
    return m;
}

std::vector<double> JointDistribution::marginal_y() const {
    std::vector<double> m(cols(), 0.0);
    for (const auto& row : p_)
        for (std::size_t y = 0; y < row.size(); ++y) m[y] += row[y];
    return m;
}

double mutual_information(const JointDistribution& joint) {
    const auto px = joint.marginal_x();
    const auto py = joint.marginal_y();
    double mi = 0.0;
    for (std::size_t x = 0; x < joint.rows(); ++x) {
        for (std::size_t y = 0; y < joint.cols(); ++y) {
            const double pxy = joint(x, y);
            if (pxy == 0.0) continue;
            mi += pxy * std::log(pxy / (px[x] * py[y]));
        }
    }
    // Rounding can leave a tiny negative sum; the true value is never below 0.
    return std::max(mi, 0.0);
}

} // namespace re3val
