#pragma once

// Everything in one include.

#include "ddsl/calib/captures.hpp"
#include "ddsl/calib/dispersion_fit.hpp"
#include "ddsl/calib/eta.hpp"
#include "ddsl/calib/peak.hpp"
#include "ddsl/calib/refine.hpp"
#include "ddsl/core/error.hpp"
#include "ddsl/core/frames.hpp"
#include "ddsl/core/grid.hpp"
#include "ddsl/core/image.hpp"
#include "ddsl/core/io.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/core/srgb.hpp"
#include "ddsl/depth/stereo.hpp"
#include "ddsl/eval/metrics.hpp"
#include "ddsl/eval/report.hpp"
#include "ddsl/flow/align.hpp"
#include "ddsl/flow/estimate.hpp"
#include "ddsl/optics/bundle.hpp"
#include "ddsl/optics/camera.hpp"
#include "ddsl/optics/dispersion.hpp"
#include "ddsl/optics/radiometry.hpp"
#include "ddsl/patterns.hpp"
#include "ddsl/recon/pipeline.hpp"
#include "ddsl/recon/solver.hpp"
#include "ddsl/recon/system.hpp"
#include "ddsl/simulator/captures.hpp"
#include "ddsl/simulator/render.hpp"
#include "ddsl/simulator/scene.hpp"
#include "ddsl/simulator/setup.hpp"
