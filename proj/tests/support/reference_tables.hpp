#pragma once

#include <array>

namespace mveq::fixtures {

using Vec3 = std::array<double, 3>;

inline constexpr double kPrintTol = 5e-4;

// Reference tables for the example preset (t = 0, x = 1), 4 decimals.
inline const std::array<Vec3, 4> kOpenLoopGain{{{0.1391, 0.2257, 0.8038},
                                                {0.1842, 0.2988, 1.0643},
                                                {0.2676, 0.4341, 1.5461},
                                                {0.4739, 0.7689, 2.7381}}};

inline const std::array<Vec3, 4> kFeedbackGain{{{0.0077, 0.0124, 0.0443},
                                                {0.0168, 0.0273, 0.0971},
                                                {0.0333, 0.0540, 0.1923},
                                                {0.4739, 0.7689, 2.7381}}};
inline const std::array<Vec3, 4> kFeedbackOffset{{{0.0730, 0.1185, 0.4220},
                                                  {0.0922, 0.1496, 0.5328},
                                                  {0.1221, 0.1981, 0.7055},
                                                  {0.4739, 0.7689, 2.7381}}};

inline const std::array<Vec3, 4> kMixedGain{{{0.2274, 0.3689, 1.3137},
                                             {0.3611, 0.5858, 2.0862},
                                             {0.3382, 0.5486, 1.9537},
                                             {0.4739, 0.7689, 2.7381}}};
inline const std::array<Vec3, 4> kMixedOffset{{{0.2195, 0.3561, 1.2683},
                                               {0.3543, 0.5747, 2.0468},
                                               {0.3365, 0.5460, 1.9443},
                                               {0.4739, 0.7689, 2.7381}}};
inline const Vec3 kMixedO3Eigenvalues{0.0041, 0.0318, 0.0930};

}  // namespace mveq::fixtures
