#pragma once

// Umbrella header: model-robust experimental design toolkit for quantile
// regression.  Include individual headers instead when compile time
// matters.

#include "qrdesign/analytic.hpp"
#include "qrdesign/basis.hpp"
#include "qrdesign/cli.hpp"
#include "qrdesign/errors.hpp"
#include "qrdesign/io.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/loss.hpp"
#include "qrdesign/moments.hpp"
#include "qrdesign/nelder_mead.hpp"
#include "qrdesign/parallel.hpp"
#include "qrdesign/qreg.hpp"
#include "qrdesign/rng.hpp"
#include "qrdesign/search.hpp"
#include "qrdesign/simulate.hpp"
#include "qrdesign/space.hpp"
#include "qrdesign/variance.hpp"
