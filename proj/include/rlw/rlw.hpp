#pragma once

#include "rlw/domain.hpp"
#include "rlw/value_store.hpp"
#include "rlw/conditioning.hpp"
#include "rlw/matching.hpp"
#include "rlw/bandit.hpp"
#include "rlw/policy.hpp"
#include "rlw/preset.hpp"
#include "rlw/simulator.hpp"
#include "rlw/experiment.hpp"
