#pragma once

#include "gridfreq/compare.hpp"
#include "gridfreq/dataio.hpp"
#include "gridfreq/fir.hpp"
#include "gridfreq/stream.hpp"
#include "gridfreq/synth.hpp"
#include "gridfreq/time.hpp"
#include "gridfreq/timebase.hpp"
#include "gridfreq/zcfreq.hpp"
