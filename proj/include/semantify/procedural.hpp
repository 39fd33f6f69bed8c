#pragma once

#include "semantify/morphable_model.hpp"

namespace semantify {

/// A small closed body-like surface of revolution (roughly 1.8 units tall,
/// facing +z) with ten smooth blendshapes, most of them localized to one
/// body region. Used by the demo pipeline and the tests in place of a
/// licensed body model.
MorphableModel make_toy_body_model(int rings = 60, int segments = 32);

}  // namespace semantify
