#pragma once

#include "mrb/calibration.hpp"
#include "mrb/degrade.hpp"
#include "mrb/error.hpp"
#include "mrb/fft.hpp"
#include "mrb/formats.hpp"
#include "mrb/io.hpp"
#include "mrb/losses.hpp"
#include "mrb/motion.hpp"
#include "mrb/nig.hpp"
#include "mrb/parallel.hpp"
#include "mrb/patch.hpp"
#include "mrb/phantom.hpp"
#include "mrb/quality.hpp"
#include "mrb/volume.hpp"
