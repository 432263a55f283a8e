#ifndef PSDETECT_SAMPLERS_HPP
#define PSDETECT_SAMPLERS_HPP

#include "psdetect/intensity.hpp"
#include "psdetect/point_pattern.hpp"
#include "psdetect/rng.hpp"

namespace psdetect {

/// Fixed-n Binomial point process: n i.i.d. points with density
/// proportional to the intensity, by rejection against its supremum.
PointPattern sample_binomial_ipp(const IntensityModel& intensity, int n,
                                 Rng& rng);

/// Inhomogeneous Poisson process on the unit square (thinning
/// construction: Poisson(sup lambda) proposals, each kept with
/// probability lambda/sup lambda).
PointPattern sample_ipp(const IntensityModel& intensity, Rng& rng);

/// Fixed-n hard core process with interaction radius R: no two points
/// closer than R.
struct HardcoreModel {
  double radius = 0.0;
  int n = 0;

  void validate() const;
};

/// Uniform-intensity hard core sample (Metropolis shift chain from a
/// sequential-inhibition start).
PointPattern sample_hardcore(const HardcoreModel& model, Rng& rng);

/// Hard core sample whose stationary density is proportional to
/// prod_i lambda(s_i) restricted to feasible configurations.
PointPattern sample_hardcore(const HardcoreModel& model,
                             const IntensityModel& intensity, Rng& rng);

/// Hard core radius estimate: the minimum observed pairwise distance.
HardcoreModel fit_hardcore(const PointPattern& pattern);

}  // namespace psdetect

#endif  // PSDETECT_SAMPLERS_HPP
