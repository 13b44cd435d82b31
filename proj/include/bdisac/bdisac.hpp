#pragma once

#include "bdisac/ao_driver.hpp"
#include "bdisac/geometry.hpp"
#include "bdisac/manifold.hpp"
#include "bdisac/metrics.hpp"
#include "bdisac/psca_beamforming.hpp"
#include "bdisac/psca_scattering.hpp"
#include "bdisac/rng.hpp"
#include "bdisac/scenario.hpp"
#include "bdisac/types.hpp"
