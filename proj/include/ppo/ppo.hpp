#pragma once

#include "ppo/basis.hpp"
#include "ppo/data.hpp"
#include "ppo/experiment.hpp"
#include "ppo/filters.hpp"
#include "ppo/io.hpp"
#include "ppo/matrix.hpp"
#include "ppo/nn.hpp"
#include "ppo/rng.hpp"
#include "ppo/training.hpp"
#include "ppo/wav.hpp"
