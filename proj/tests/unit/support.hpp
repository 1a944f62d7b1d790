#pragma once

#include <cmath>

#include "fgd/linmodel.hpp"
#include "fgd/random.hpp"

namespace fgd::test {

inline Matrix random_matrix(int rows, int cols, Rng& rng)
{
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = rng.normal();
    return m;
}

/// A A^T / d + shift I.
inline Matrix random_spd(int d, Rng& rng, double shift = 0.5)
{
    const Matrix a = random_matrix(d, d, rng);
    return a * a.transpose() / d + shift * Matrix::Identity(d, d);
}

inline int random_int(Rng& rng, int lo, int hi)
{
    return lo + static_cast<int>(std::floor(rng.uniform() * (hi - lo + 1)));
}

inline double rel_diff(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace fgd::test
