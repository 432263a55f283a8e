#ifndef PSDETECT_RANDOM_FIELD_HPP
#define PSDETECT_RANDOM_FIELD_HPP

#include "psdetect/grid_field.hpp"
#include "psdetect/matern.hpp"
#include "psdetect/rng.hpp"

namespace psdetect {

inline constexpr int kMaxFieldResolution = 128;

/// Draw a mean-zero Gaussian random field with Matern covariance on the
/// lattice. The Cholesky factor of the correlation matrix is cached per
/// (nu, range, resolution), so repeated draws at the same settings cost
/// one triangular multiply. Deterministic given the rng state.
GridField simulate_field(const MaternParams& params, int resolution,
                         Rng& rng);

}  // namespace psdetect

#endif  // PSDETECT_RANDOM_FIELD_HPP
