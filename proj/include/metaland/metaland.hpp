#pragma once

#include "metaland/core.hpp"
#include "metaland/env_config.hpp"
#include "metaland/dynamics.hpp"
#include "metaland/terrain.hpp"
#include "metaland/altimeter.hpp"
#include "metaland/lander_env.hpp"
#include "metaland/point_mass.hpp"
#include "metaland/nets.hpp"
#include "metaland/optim.hpp"
#include "metaland/rollout.hpp"
#include "metaland/ppo.hpp"
#include "metaland/checkpoint.hpp"
#include "metaland/drdv.hpp"
#include "metaland/harness.hpp"
