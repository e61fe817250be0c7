#pragma once

#include "aecomm/autoenc.hpp"
#include "aecomm/baselines.hpp"
#include "aecomm/channel.hpp"
#include "aecomm/checkpoint.hpp"
#include "aecomm/errors.hpp"
#include "aecomm/harness.hpp"
#include "aecomm/nn.hpp"
#include "aecomm/results.hpp"
#include "aecomm/rng.hpp"
