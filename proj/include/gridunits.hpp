// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"
#include "gridunits/fft.hpp"
#include "gridunits/gridnet/config.hpp"
#include "gridunits/gridnet/layers.hpp"
#include "gridunits/gridnet/network.hpp"
#include "gridunits/gridnet/weights.hpp"
#include "gridunits/manifest.hpp"
#include "gridunits/masking.hpp"
#include "gridunits/metrics.hpp"
#include "gridunits/mixing.hpp"
#include "gridunits/pipeline.hpp"
#include "gridunits/resample.hpp"
#include "gridunits/stft.hpp"
#include "gridunits/synth.hpp"
#include "gridunits/units.hpp"
#include "gridunits/vad.hpp"
#include "gridunits/wav.hpp"
