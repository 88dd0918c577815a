#pragma once

#include "dorsal/hand_model.hpp"

namespace dorsal {

/// Procedural right hand with the same roles as a full hand model: 16 joints,
/// 21 keypoints, 7 face categories and a rank-4 shape basis.
///
/// Template axes: wrist at the origin, fingers along +Y, palm normal +Z and
/// dorsum normal -Z, thumb on the +X side. Finger segments have a diamond
/// cross-section with corners on the palm and dorsal sides, so a finger seen
/// squarely from above shows half of its side surface. Fingertip keypoints are
/// apex vertices offset towards the dorsum, which keeps distal twist
/// observable from keypoints.
///
/// Shape coefficients: 0 global scale, 1 finger length, 2 palm width,
/// 3 thickness.
RiggedHandTemplate make_synthetic_hand();

}  // namespace dorsal
