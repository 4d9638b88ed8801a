#pragma once

// Umbrella header for the EDIT toolkit.

#include "edit/autodiff.hpp"
#include "edit/backbone.hpp"
#include "edit/checkpoint.hpp"
#include "edit/cli.hpp"
#include "edit/core.hpp"
#include "edit/data.hpp"
#include "edit/discriminator.hpp"
#include "edit/errors.hpp"
#include "edit/evaluation.hpp"
#include "edit/generator.hpp"
#include "edit/image_io.hpp"
#include "edit/losses.hpp"
#include "edit/param_net.hpp"
#include "edit/perceptual.hpp"
#include "edit/tensor.hpp"
#include "edit/trainer.hpp"
