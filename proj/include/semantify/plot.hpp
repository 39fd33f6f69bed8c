#pragma once

#include <Eigen/Core>

#include "semantify/evaluation.hpp"
#include "semantify/image.hpp"
#include "semantify/mapper.hpp"
#include "semantify/morphable_model.hpp"
#include "semantify/rasterizer.hpp"

namespace semantify {

/// Blue (-1) through white (0) to red (+1).
Rgb diverging_color(double value);
/// Dark blue (0) through yellow to red (1).
Rgb heat_color(double t);

/// One square cell per matrix entry, values in [-1, 1].
Image correlation_heatmap(const Eigen::MatrixXd& corr, int cell = 16);

/// Train (blue) and validation (orange) loss per epoch on a log axis.
Image training_curve(const TrainingLog& log, int width = 640, int height = 400);

/// The mean-score mesh colored by the normalized effect field.
Image effect_render(const MapperArtifact& artifact, const MorphableModel& model, const EffectField& field,
                    const RendererBackend& renderer, const CameraPose& camera = {}, int image_size = 384);

}  // namespace semantify
