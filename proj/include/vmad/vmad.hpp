#pragma once

// Umbrella header for the V-MAD score-fusion toolkit.

#include "vmad/cli.hpp"
#include "vmad/dataset.hpp"
#include "vmad/errors.hpp"
#include "vmad/fusion.hpp"
#include "vmad/image.hpp"
#include "vmad/image_png.hpp"
#include "vmad/manifest.hpp"
#include "vmad/metrics.hpp"
#include "vmad/quality.hpp"
#include "vmad/rng.hpp"
#include "vmad/svr.hpp"
#include "vmad/synth.hpp"
#include "vmad/text.hpp"
