#pragma once

#include "phasekit/version.hpp"
#include "phasekit/error.hpp"
#include "phasekit/dual.hpp"
#include "phasekit/model.hpp"
#include "phasekit/models.hpp"
#include "phasekit/odeint.hpp"
#include "phasekit/spectral.hpp"
#include "phasekit/orbit.hpp"
#include "phasekit/prc.hpp"
#include "phasekit/sensitivity.hpp"
#include "phasekit/entrainment.hpp"
#include "phasekit/robustness.hpp"
