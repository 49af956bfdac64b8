#pragma once

#include <cstddef>
#include <vector>

namespace re3val {

/// Joint distribution P(x, y) over finite X (rows) and Y (columns).
class JointDistribution {
  public:
    /// Validates non-negativity and that entries sum to 1 within `tolerance`.
    JointDistribution(std::vector<std::vector<double>> p, double tolerance = 1e-12);

    /// Normalizes non-negative counts into a joint.
    static JointDistribution from_counts(const std::vector<std::vector<double>>& counts);

    std::size_t rows() const { return p_.size(); }
    std::size_t cols() const { return p_.empty() ? 0 : p_.front().size(); }
    double operator()(std::size_t x, std::size_t y) const { return p_[x][y]; }

    std::vector<double> marginal_x() const;
    std::vector<double> marginal_y() const;

  private:
    std::vector<std::vector<double>> p_;
};

/// I(X;Y) = sum P(x,y) ln(P(x,y) / (P(x) P(y))) in nats, with 0 ln 0 = 0.
double mutual_information(const JointDistribution& joint);

} // namespace re3val
