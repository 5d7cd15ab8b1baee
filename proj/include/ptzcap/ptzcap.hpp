#pragma once

#include "ptzcap/types.hpp"
#include "ptzcap/skeleton.hpp"
#include "ptzcap/camera.hpp"
#include "ptzcap/motion_basis.hpp"
#include "ptzcap/signal.hpp"
#include "ptzcap/rotation_from_background.hpp"
#include "ptzcap/energy.hpp"
#include "ptzcap/lbfgs.hpp"
#include "ptzcap/solver.hpp"
#include "ptzcap/metrics.hpp"
#include "ptzcap/synth.hpp"
#include "ptzcap/io.hpp"
